//! The topology document served to the map, built from container labels.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::Path;

use emu_core::compile::{self, Manifest};
use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::error::{MapdError, Result};

/// One container as a runtime or manifest describes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainerInfo {
    pub name: String,
    pub labels: BTreeMap<String, String>,
    /// `None` when the source has no notion of run state.
    pub running: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyAttachment {
    pub network: String,
    /// CIDR form, `10.150.0.71/24`.
    pub address: String,
    pub scope: String,
}

impl TopologyAttachment {
    pub fn ip(&self) -> Option<Ipv4Addr> {
        self.address.split('/').next()?.parse().ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyNode {
    pub id: String,
    pub name: String,
    pub asn: u32,
    pub role: String,
    pub display_name: String,
    pub description: String,
    pub attachments: Vec<TopologyAttachment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub running: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyEdge {
    pub node_id: String,
    pub network_name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyNetwork {
    pub name: String,
    pub prefix: Ipv4Net,
    pub scope: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyDocument {
    pub nodes: Vec<TopologyNode>,
    pub edges: Vec<TopologyEdge>,
    pub networks: Vec<TopologyNetwork>,
}

fn label<'a>(c: &'a ContainerInfo, key: &str) -> Result<&'a str> {
    c.labels
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| MapdError::MissingLabels {
            container: c.name.clone(),
            label: key.to_string(),
        })
}

impl TopologyDocument {
    /// Builds the document from labels alone. Networks are those the
    /// attachments mention, with prefixes taken from the attached addresses.
    pub fn from_containers(containers: &[ContainerInfo]) -> Result<Self> {
        let mut doc = TopologyDocument::default();
        let mut networks: BTreeMap<String, TopologyNetwork> = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for c in containers {
            let name = label(c, compile::LABEL_NODE_NAME)?.to_string();
            let asn = label(c, compile::LABEL_NODE_ASN)?.parse().map_err(|_| {
                MapdError::MissingLabels {
                    container: c.name.clone(),
                    label: compile::LABEL_NODE_ASN.to_string(),
                }
            })?;
            let role = label(c, compile::LABEL_NODE_ROLE)?.to_string();
            let display_name = c
                .labels
                .get(compile::LABEL_NODE_DISPLAYNAME)
                .cloned()
                .unwrap_or_else(|| name.clone());
            let description = c
                .labels
                .get(compile::LABEL_NODE_DESCRIPTION)
                .cloned()
                .unwrap_or_default();
            let mut attachments = Vec::new();
            for i in 0.. {
                let Some(net) = c.labels.get(&compile::net_label(i, "name")) else {
                    break;
                };
                let address = label(c, &compile::net_label(i, "address"))?.to_string();
                let scope = label(c, &compile::net_label(i, "scope"))?.to_string();
                if let Ok(cidr) = address.parse::<Ipv4Net>() {
                    networks
                        .entry(net.clone())
                        .or_insert_with(|| TopologyNetwork {
                            name: net.clone(),
                            prefix: cidr.trunc(),
                            scope: scope.clone(),
                        });
                }
                doc.edges.push(TopologyEdge {
                    node_id: c.name.clone(),
                    network_name: net.clone(),
                });
                attachments.push(TopologyAttachment {
                    network: net.clone(),
                    address,
                    scope,
                });
            }
            if !ids.insert(c.name.clone()) {
                return Err(MapdError::SourceUnavailable(format!(
                    "container `{}` listed twice",
                    c.name
                )));
            }
            doc.nodes.push(TopologyNode {
                id: c.name.clone(),
                name,
                asn,
                role,
                display_name,
                description,
                attachments,
                running: c.running,
            });
        }
        doc.networks = networks.into_values().collect();
        Ok(doc)
    }

    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let containers: Vec<ContainerInfo> = manifest
            .services
            .iter()
            .map(|(name, svc)| ContainerInfo {
                name: name.clone(),
                labels: svc.labels.clone(),
                running: None,
            })
            .collect();
        let mut doc = Self::from_containers(&containers)?;
        let mut networks: BTreeMap<String, TopologyNetwork> = doc
            .networks
            .drain(..)
            .map(|n| (n.name.clone(), n))
            .collect();
        for (name, net) in &manifest.networks {
            let Some(ipam) = net.ipam.config.first() else {
                continue;
            };
            let scope = net
                .labels
                .get(compile::LABEL_NET_SCOPE)
                .cloned()
                .unwrap_or_default();
            networks.insert(
                name.clone(),
                TopologyNetwork {
                    name: name.clone(),
                    prefix: ipam.subnet,
                    scope,
                },
            );
        }
        doc.networks = networks.into_values().collect();
        Ok(doc)
    }

    /// Reads `docker-compose.yml` from a compiled output directory. An empty
    /// file gives an empty document.
    pub fn load_manifest_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(compile::MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| MapdError::SourceUnavailable(format!("{}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let manifest =
            Manifest::from_yaml(&text).map_err(|e| MapdError::SourceUnavailable(e.to_string()))?;
        Self::from_manifest(&manifest)
    }

    pub fn node(&self, id: &str) -> Option<&TopologyNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// (node id, network, address) for every attachment.
    pub fn triples(&self) -> BTreeSet<(String, String, Ipv4Addr)> {
        self.nodes
            .iter()
            .flat_map(|n| {
                n.attachments
                    .iter()
                    .filter_map(move |a| Some((n.id.clone(), a.network.clone(), a.ip()?)))
            })
            .collect()
    }

    /// Node id holding `addr`, if any.
    pub fn holder_of(&self, addr: Ipv4Addr) -> Option<&str> {
        self.nodes
            .iter()
            .find(|n| n.attachments.iter().any(|a| a.ip() == Some(addr)))
            .map(|n| n.id.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn container(name: &str, labels: &[(&str, &str)]) -> ContainerInfo {
        ContainerInfo {
            name: name.into(),
            labels: labels
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            running: None,
        }
    }

    #[test]
    fn missing_name_label() {
        let c = container("x", &[("emu.node.asn", "150")]);
        let err = TopologyDocument::from_containers(&[c]).unwrap_err();
        assert!(matches!(err, MapdError::MissingLabels { label, .. } if label == "emu.node.name"));
    }

    #[test]
    fn attachments_become_edges_and_networks() {
        let c = container(
            "as150h-web",
            &[
                ("emu.node.name", "web"),
                ("emu.node.asn", "150"),
                ("emu.node.role", "host"),
                ("emu.net.0.name", "as150-net0"),
                ("emu.net.0.address", "10.150.0.71/24"),
                ("emu.net.0.scope", "as150"),
            ],
        );
        let doc = TopologyDocument::from_containers(&[c]).unwrap();
        assert_eq!(doc.nodes[0].display_name, "web");
        assert_eq!(doc.edges.len(), 1);
        assert_eq!(doc.networks[0].prefix.to_string(), "10.150.0.0/24");
        assert_eq!(
            doc.holder_of("10.150.0.71".parse().unwrap()),
            Some("as150h-web")
        );
    }
}
