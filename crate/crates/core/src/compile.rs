//! Backends turning a rendered emulation into artifacts: a container tree
//! with a compose manifest, and a DOT topology graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::base::{FileSource, Network, Node, Role, Scope};
use crate::emulator::RenderedEmulation;
use crate::routing::emit_router_config;
use crate::{Error, Result};

pub const DEFAULT_IMAGE: &str = "debian:bookworm-slim";
pub const MANIFEST_FILE: &str = "docker-compose.yml";
pub const BIRD_CONF: &str = "/etc/bird/bird.conf";
pub const OPENVPN_PORT: u16 = 1194;

pub const LABEL_NODE_NAME: &str = "emu.node.name";
pub const LABEL_NODE_ASN: &str = "emu.node.asn";
pub const LABEL_NODE_ROLE: &str = "emu.node.role";
pub const LABEL_NODE_DISPLAYNAME: &str = "emu.node.displayname";
pub const LABEL_NODE_DESCRIPTION: &str = "emu.node.description";
pub const LABEL_NET_PREFIX: &str = "emu.net.";
pub const LABEL_NET_SCOPE: &str = "emu.net.scope";
pub const LABEL_ROLE_VPN: &str = "vpn";

/// `emu.net.{i}.name`, `emu.net.{i}.address` or `emu.net.{i}.scope`.
pub fn net_label(index: usize, field: &str) -> String {
    format!("{LABEL_NET_PREFIX}{index}.{field}")
}

/// Name of a network inside the manifest: `ix100` or `as150-net0`.
pub fn manifest_network_name(net: &Network) -> String {
    match net.scope {
        Scope::Ix(_) => net.name.clone(),
        Scope::As(asn) => format!("as{asn}-{}", net.name),
    }
}

/// Container name for a node: `as{asn}{code}-{name}`.
pub fn container_name(node: &Node) -> String {
    sanitize(&format!("as{}{}-{}", node.asn, node.role.code(), node.name))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            'a'..='z' | '0'..='9' | '-' | '_' | '.' => c,
            'A'..='Z' => c.to_ascii_lowercase(),
            _ => '-',
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuildStep {
    Install(Vec<String>),
    Copy { from: String, to: String },
    Run(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    /// Manifest network name.
    pub network: String,
    /// Name of the interface inside the container.
    pub interface: String,
    pub address: Ipv4Addr,
    pub prefix_len: u8,
}

impl Attachment {
    pub fn cidr(&self) -> String {
        format!("{}/{}", self.address, self.prefix_len)
    }
}

/// Everything needed to build and start one container.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerSpec {
    pub name: String,
    pub role: String,
    pub build_steps: Vec<BuildStep>,
    pub start_script: String,
    pub attachments: Vec<Attachment>,
    pub labels: BTreeMap<String, String>,
    /// Staged files: container path -> content source.
    pub files: BTreeMap<String, FileSource>,
    pub ports: Vec<String>,
    pub forwarding: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub services: BTreeMap<String, ManifestService>,
    pub networks: BTreeMap<String, ManifestNetwork>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestService {
    pub build: String,
    pub container_name: String,
    #[serde(default)]
    pub cap_add: Vec<String>,
    #[serde(default)]
    pub privileged: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sysctls: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ports: Vec<String>,
    #[serde(default)]
    pub networks: BTreeMap<String, ServiceNetwork>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceNetwork {
    pub ipv4_address: Ipv4Addr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestNetwork {
    pub driver: String,
    pub ipam: Ipam,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ipam {
    pub config: Vec<IpamConfig>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpamConfig {
    pub subnet: Ipv4Net,
}

impl Manifest {
    pub fn from_yaml(text: &str) -> Result<Self> {
        Ok(serde_yaml::from_str(text)?)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text =
            fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_yaml(&text)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("manifest serializes")
    }

    /// (container, network, address) for every attachment.
    pub fn triples(&self) -> BTreeSet<(String, String, Ipv4Addr)> {
        self.services
            .iter()
            .flat_map(|(name, svc)| {
                svc.networks
                    .iter()
                    .map(move |(net, a)| (name.clone(), net.clone(), a.ipv4_address))
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CompileOutput {
    pub manifest: Manifest,
    pub containers: Vec<ContainerSpec>,
}

impl CompileOutput {
    pub fn count_role(&self, role: &str) -> usize {
        self.containers.iter().filter(|c| c.role == role).count()
    }
}

/// Emits one build directory per container plus a compose manifest.
#[derive(Clone, Debug)]
pub struct ContainerCompiler {
    image: String,
}

impl Default for ContainerCompiler {
    fn default() -> Self {
        ContainerCompiler {
            image: DEFAULT_IMAGE.to_string(),
        }
    }
}

impl ContainerCompiler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_image(image: &str) -> Self {
        ContainerCompiler {
            image: image.to_string(),
        }
    }

    /// Container specs and manifest, without touching the filesystem.
    pub fn plan(&self, rendered: &RenderedEmulation) -> Result<CompileOutput> {
        let base = rendered.base();
        let mut containers = Vec::new();
        for node in base.nodes() {
            containers.push(self.node_spec(rendered, node)?);
        }
        for net in base.networks() {
            if net.remote_access.is_some() {
                containers.push(self.vpn_spec(net));
            }
        }
        let mut seen = BTreeMap::new();
        for c in &containers {
            if let Some(prev) = seen.insert(c.name.clone(), c.labels[LABEL_NODE_NAME].clone()) {
                return Err(Error::NameCollision {
                    name: c.name.clone(),
                    first: prev,
                    second: c.labels[LABEL_NODE_NAME].clone(),
                });
            }
        }

        let mut manifest = Manifest::default();
        for net in base.networks() {
            let name = manifest_network_name(net);
            let mut labels = BTreeMap::new();
            labels.insert(LABEL_NET_SCOPE.to_string(), net.scope.to_string());
            manifest.networks.insert(
                name,
                ManifestNetwork {
                    driver: "bridge".into(),
                    ipam: Ipam {
                        config: vec![IpamConfig { subnet: net.prefix }],
                    },
                    labels,
                },
            );
        }
        for c in &containers {
            let mut sysctls = BTreeMap::new();
            if c.forwarding {
                sysctls.insert("net.ipv4.ip_forward".to_string(), "1".to_string());
            }
            manifest.services.insert(
                c.name.clone(),
                ManifestService {
                    build: format!("./{}", c.name),
                    container_name: c.name.clone(),
                    cap_add: vec!["NET_ADMIN".into(), "SYS_ADMIN".into()],
                    privileged: true,
                    sysctls,
                    ports: c.ports.clone(),
                    networks: c
                        .attachments
                        .iter()
                        .map(|a| {
                            (
                                a.network.clone(),
                                ServiceNetwork {
                                    ipv4_address: a.address,
                                },
                            )
                        })
                        .collect(),
                    labels: c.labels.clone(),
                },
            );
        }
        Ok(CompileOutput {
            manifest,
            containers,
        })
    }

    /// Writes the container tree under `out_dir`.
    pub fn compile(&self, rendered: &RenderedEmulation, out_dir: &Path) -> Result<CompileOutput> {
        let output = self.plan(rendered)?;
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
        for c in &output.containers {
            self.write_container(out_dir, c)?;
        }
        let path = out_dir.join(MANIFEST_FILE);
        fs::write(&path, output.manifest.to_yaml())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(output)
    }

    fn node_spec(&self, rendered: &RenderedEmulation, node: &Node) -> Result<ContainerSpec> {
        let base = rendered.base();
        let key = node.key();
        let mut attachments = Vec::new();
        for iface in &node.interfaces {
            let net = match key.scope {
                Scope::Ix(id) => &base.internet_exchange(id).expect("rs exchange").network,
                Scope::As(asn) => resolve_network(base, asn, &iface.network)
                    .ok_or_else(|| Error::UnknownNetwork(iface.network.clone()))?,
            };
            attachments.push(Attachment {
                network: manifest_network_name(net),
                interface: iface.network.clone(),
                address: iface.address,
                prefix_len: net.prefix.prefix_len(),
            });
        }

        let mut software: BTreeSet<String> = node.software.clone();
        software.insert("iproute2".into());
        let mut files: BTreeMap<String, FileSource> = BTreeMap::new();
        if let Some(conf) = emit_router_config(rendered, &key)? {
            software.insert("bird2".into());
            files.insert(BIRD_CONF.into(), FileSource::Inline(conf));
        }
        if node.role == Role::RealWorldRouter {
            software.insert("iptables".into());
        }
        for f in &node.files {
            files.insert(f.path.clone(), f.source.clone());
        }

        let mut script = script_header();
        for a in &attachments {
            let _ = writeln!(script, "rename_iface {} {}", a.address, a.interface);
        }
        script.push('\n');
        match node.role {
            Role::Host => {
                if let Some(gw) = host_gateway(rendered, node) {
                    let _ = writeln!(script, "ip route replace default via {gw}");
                }
            }
            Role::Router | Role::RealWorldRouter => {
                if let Some(lo) = rendered.loopback(&key) {
                    script.push_str("ip link add dummy0 type dummy 2>/dev/null || true\n");
                    script.push_str("ip link set dummy0 up\n");
                    let _ = writeln!(script, "ip addr add {lo}/32 dev dummy0 2>/dev/null || true");
                }
                if node.role == Role::RealWorldRouter {
                    script.push_str("iptables -t nat -A POSTROUTING -j MASQUERADE\n");
                }
                let _ = writeln!(script, "bird -c {BIRD_CONF}");
            }
            Role::RouteServer => {
                let _ = writeln!(script, "bird -c {BIRD_CONF}");
            }
        }
        for cmd in &node.start_commands {
            script.push_str(cmd);
            script.push('\n');
        }
        script.push_str("\nexec tail -f /dev/null\n");

        let mut build_steps = vec![BuildStep::Install(software.into_iter().collect())];
        if !files.is_empty() {
            build_steps.push(BuildStep::Copy {
                from: "files/".into(),
                to: "/".into(),
            });
        }
        for cmd in &node.build_commands {
            build_steps.push(BuildStep::Run(cmd.clone()));
        }

        let asn = match node.role {
            Role::RouteServer => 0,
            _ => node.asn,
        };
        let mut labels = BTreeMap::new();
        labels.insert(LABEL_NODE_NAME.to_string(), node.name.clone());
        labels.insert(LABEL_NODE_ASN.to_string(), asn.to_string());
        labels.insert(LABEL_NODE_ROLE.to_string(), node.role.as_str().to_string());
        labels.insert(
            LABEL_NODE_DISPLAYNAME.to_string(),
            node.display_name
                .clone()
                .unwrap_or_else(|| node.name.clone()),
        );
        labels.insert(
            LABEL_NODE_DESCRIPTION.to_string(),
            node.description.clone().unwrap_or_default(),
        );
        add_net_labels(&mut labels, &attachments, base);

        Ok(ContainerSpec {
            name: container_name(node),
            role: node.role.as_str().to_string(),
            build_steps,
            start_script: script,
            attachments,
            labels,
            files,
            ports: Vec::new(),
            forwarding: node.role.is_router(),
        })
    }

    fn vpn_spec(&self, net: &Network) -> ContainerSpec {
        let Scope::As(asn) = net.scope else {
            unreachable!("remote access only on AS networks")
        };
        let spec = net.remote_access.as_ref().expect("caller checked");
        let address = spec.address.expect("assigned at render");
        let attachment = Attachment {
            network: manifest_network_name(net),
            interface: net.name.clone(),
            address,
            prefix_len: net.prefix.prefix_len(),
        };
        let conf = format!(
            "port {OPENVPN_PORT}\nproto udp\ndev tap0\nserver-bridge {address} {} {} {}\nkeepalive 10 60\nverb 3\n",
            net.prefix.netmask(),
            Ipv4Addr::from(u32::from(net.prefix.broadcast()) - 60),
            Ipv4Addr::from(u32::from(net.prefix.broadcast()) - 11),
        );
        let mut files = BTreeMap::new();
        files.insert(
            "/etc/openvpn/server.conf".to_string(),
            FileSource::Inline(conf),
        );
        let mut script = script_header();
        let _ = writeln!(script, "rename_iface {address} {}", net.name);
        script.push_str("\nopenvpn --config /etc/openvpn/server.conf --daemon\n");
        script.push_str("\nexec tail -f /dev/null\n");
        let name = format!("vpn-{}", net.name);
        let mut labels = BTreeMap::new();
        labels.insert(LABEL_NODE_NAME.to_string(), name.clone());
        labels.insert(LABEL_NODE_ASN.to_string(), asn.to_string());
        labels.insert(LABEL_NODE_ROLE.to_string(), LABEL_ROLE_VPN.to_string());
        labels.insert(LABEL_NODE_DISPLAYNAME.to_string(), name.clone());
        labels.insert(
            LABEL_NODE_DESCRIPTION.to_string(),
            format!("remote access into {}", net.qualified_name()),
        );
        let attachments = vec![attachment];
        for (i, a) in attachments.iter().enumerate() {
            labels.insert(net_label(i, "name"), a.network.clone());
            labels.insert(net_label(i, "address"), a.cidr());
            labels.insert(net_label(i, "scope"), net.scope.to_string());
        }
        ContainerSpec {
            name: sanitize(&format!("as{asn}vpn-{}", net.name)),
            role: LABEL_ROLE_VPN.to_string(),
            build_steps: vec![
                BuildStep::Install(vec!["iproute2".into(), "openvpn".into()]),
                BuildStep::Copy {
                    from: "files/".into(),
                    to: "/".into(),
                },
            ],
            start_script: script,
            attachments,
            labels,
            files,
            ports: vec![format!("{}:{OPENVPN_PORT}/udp", spec.exposed_port)],
            forwarding: false,
        }
    }

    /// Container build file for a spec.
    pub fn dockerfile(&self, spec: &ContainerSpec) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "FROM {}", self.image);
        out.push_str("ARG DEBIAN_FRONTEND=noninteractive\n");
        for step in &spec.build_steps {
            match step {
                BuildStep::Install(pkgs) => {
                    let _ = writeln!(
                        out,
                        "RUN apt-get update && apt-get install -y --no-install-recommends {} && rm -rf /var/lib/apt/lists/*",
                        pkgs.join(" ")
                    );
                }
                BuildStep::Copy { from, to } => {
                    let _ = writeln!(out, "COPY {from} {to}");
                }
                BuildStep::Run(cmd) => {
                    let _ = writeln!(out, "RUN {cmd}");
                }
            }
        }
        out.push_str("COPY start.sh /start.sh\nRUN chmod +x /start.sh\nCMD [\"/start.sh\"]\n");
        out
    }
}

fn resolve_network<'a>(base: &'a crate::Base, asn: crate::Asn, name: &str) -> Option<&'a Network> {
    match crate::base::exchange_id(name) {
        Some(id) => base.internet_exchange(id).map(|ix| &ix.network),
        None => base.network_for(asn, name),
    }
}

fn add_net_labels(
    labels: &mut BTreeMap<String, String>,
    attachments: &[Attachment],
    base: &crate::Base,
) {
    for (i, a) in attachments.iter().enumerate() {
        let scope = base
            .networks()
            .find(|n| manifest_network_name(n) == a.network)
            .map(|n| n.scope.to_string())
            .unwrap_or_default();
        labels.insert(net_label(i, "name"), a.network.clone());
        labels.insert(net_label(i, "address"), a.cidr());
        labels.insert(net_label(i, "scope"), scope);
    }
}

fn host_gateway(rendered: &RenderedEmulation, host: &Node) -> Option<Ipv4Addr> {
    let iface = host.interfaces.first()?;
    let asys = rendered.base().autonomous_system(host.asn)?;
    asys.routers()
        .find_map(|r| r.interface_on(&iface.network).map(|i| i.address))
}

fn script_header() -> String {
    String::from(
        "#!/bin/bash
set -e

rename_iface() {
    local dev
    dev=$(ip -o -4 addr show | awk -v a=\"$1\" '{ split($4, p, \"/\"); if (p[1] == a) { print $2; exit } }')
    if [ -z \"$dev\" ] || [ \"$dev\" = \"$2\" ]; then
        return 0
    fi
    ip link set \"$dev\" down
    ip link set \"$dev\" name \"$2\"
    ip link set \"$2\" up
}

",
    )
}

impl ContainerCompiler {
    fn write_container(&self, out_dir: &Path, spec: &ContainerSpec) -> Result<()> {
        let dir = out_dir.join(&spec.name);
        let files_dir = dir.join("files");
        fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        write_file(&dir.join("Dockerfile"), self.dockerfile(spec).as_bytes())?;
        write_file(&dir.join("start.sh"), spec.start_script.as_bytes())?;
        set_executable(&dir.join("start.sh"))?;
        for (path, source) in &spec.files {
            let target = files_dir.join(path.trim_start_matches('/'));
            match source {
                FileSource::Inline(text) => write_file(&target, text.as_bytes())?,
                FileSource::HostPath(src) => {
                    let bytes =
                        fs::read(src).map_err(|e| Error::io(src.display().to_string(), e))?;
                    write_file(&target, &bytes)?;
                }
            }
        }
        Ok(())
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(unix)]
fn set_executable(path: &Path) -> Result<()> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(not(unix))]
fn set_executable(_path: &Path) -> Result<()> {
    Ok(())
}

/// DOT rendering of the topology: ASes as clusters, networks and nodes as
/// vertices, one edge per interface.
pub fn compile_graph(rendered: &RenderedEmulation) -> String {
    let base = rendered.base();
    let mut out = String::from("graph emulation {\n");
    out.push_str("    node [fontsize=10];\n");
    for asys in base.autonomous_systems() {
        let _ = writeln!(out, "    subgraph cluster_as{} {{", asys.asn);
        let _ = writeln!(out, "        label=\"AS{}\";", asys.asn);
        for net in asys.networks.values() {
            let _ = writeln!(
                out,
                "        \"{}\" [label=\"{}\\n{}\", shape=ellipse];",
                graph_net_id(net),
                net.name,
                net.prefix
            );
        }
        for node in asys.nodes.values() {
            let _ = writeln!(
                out,
                "        \"node:{}\" [label=\"{}\", shape={}];",
                node.key(),
                node.display_name.as_deref().unwrap_or(&node.name),
                graph_shape(node.role)
            );
        }
        out.push_str("    }\n");
    }
    for ix in base.internet_exchanges() {
        let _ = writeln!(
            out,
            "    \"{}\" [label=\"{}\\n{}\", shape=doubleoctagon];",
            graph_net_id(&ix.network),
            ix.network.name,
            ix.network.prefix
        );
        if let Some(rs) = &ix.route_server {
            let _ = writeln!(
                out,
                "    \"node:{}\" [label=\"rs {}\", shape={}];",
                rs.key(),
                rs.name,
                graph_shape(rs.role)
            );
        }
    }
    for node in base.nodes() {
        for iface in &node.interfaces {
            let net_id = match node.key().scope {
                Scope::Ix(id) => format!("net:ix{id}"),
                Scope::As(asn) => match resolve_network(base, asn, &iface.network) {
                    Some(net) => graph_net_id(net),
                    None => continue,
                },
            };
            let _ = writeln!(
                out,
                "    \"node:{}\" -- \"{}\" [label=\"{}\"];",
                node.key(),
                net_id,
                iface.address
            );
        }
    }
    out.push_str("}\n");
    out
}

fn graph_net_id(net: &Network) -> String {
    format!("net:{}", net.qualified_name())
}

fn graph_shape(role: Role) -> &'static str {
    match role {
        Role::Host => "box",
        Role::Router => "circle",
        Role::RouteServer => "hexagon",
        Role::RealWorldRouter => "doublecircle",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::Base;
    use crate::emulator::Emulator;

    fn small() -> Emulator {
        let mut base = Base::new();
        base.create_internet_exchange(100).unwrap();
        let mut asys = base.create_autonomous_system(150).unwrap();
        asys.create_network("net0").unwrap();
        asys.create_router("router0")
            .unwrap()
            .join_network("net0")
            .unwrap()
            .join_network("ix100")
            .unwrap();
        asys.create_host("web")
            .unwrap()
            .join_network("net0")
            .unwrap()
            .set_display_name("Web");
        let mut emu = Emulator::new(1);
        emu.add_layer(base).unwrap();
        emu
    }

    #[test]
    fn names_and_labels() {
        let mut emu = small();
        let rendered = emu.render().unwrap();
        let out = ContainerCompiler::new().plan(&rendered).unwrap();
        let names: Vec<_> = out.containers.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["as150r-router0", "as150h-web"]);
        let web = &out.containers[1];
        assert_eq!(web.labels[LABEL_NODE_DISPLAYNAME], "Web");
        assert_eq!(web.labels["emu.net.0.name"], "as150-net0");
        assert_eq!(web.labels["emu.net.0.address"], "10.150.0.71/24");
        assert_eq!(web.labels["emu.net.0.scope"], "as150");
        assert!(web
            .start_script
            .contains("ip route replace default via 10.150.0.254"));
        assert!(out.manifest.networks.contains_key("ix100"));
    }

    #[test]
    fn start_commands_come_last() {
        let mut base = Base::new();
        let mut asys = base.create_autonomous_system(2).unwrap();
        asys.create_network("n").unwrap();
        asys.create_host("h")
            .unwrap()
            .join_network("n")
            .unwrap()
            .append_start_command("echo ready");
        let mut emu = Emulator::new(0);
        emu.add_layer(base).unwrap();
        let rendered = emu.render().unwrap();
        let out = ContainerCompiler::new().plan(&rendered).unwrap();
        let script = &out.containers[0].start_script;
        let rename = script.find("rename_iface 10.2.0.71 n").unwrap();
        let user = script.find("echo ready").unwrap();
        assert!(rename < user);
    }

    #[test]
    fn sanitized_names_can_collide() {
        let mut base = Base::new();
        let mut asys = base.create_autonomous_system(2).unwrap();
        asys.create_network("n").unwrap();
        asys.create_host("Web").unwrap().join_network("n").unwrap();
        asys.create_host("web").unwrap().join_network("n").unwrap();
        let mut emu = Emulator::new(0);
        emu.add_layer(base).unwrap();
        let rendered = emu.render().unwrap();
        let err = ContainerCompiler::new().plan(&rendered).unwrap_err();
        assert!(matches!(err, Error::NameCollision { .. }));
    }

    #[test]
    fn empty_manifest() {
        let mut emu = Emulator::new(0);
        let rendered = emu.render().unwrap();
        let out = ContainerCompiler::new().plan(&rendered).unwrap();
        assert!(out.manifest.services.is_empty());
        assert!(out.manifest.networks.is_empty());
        let back = Manifest::from_yaml(&out.manifest.to_yaml()).unwrap();
        assert_eq!(back, out.manifest);
        assert_eq!(
            compile_graph(&rendered),
            "graph emulation {\n    node [fontsize=10];\n}\n"
        );
    }
}
