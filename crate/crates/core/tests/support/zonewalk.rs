//! Iterative DNS resolution over a compiled output tree. Reads the manifest,
//! each container's named.conf and its zone files; shares no code with the
//! generator.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rr {
    pub owner: String,
    pub rtype: String,
    pub rdata: String,
}

/// Container -> zone apex -> records.
pub struct Tree {
    pub addresses: BTreeMap<String, Vec<Ipv4Addr>>,
    pub zones: BTreeMap<String, BTreeMap<String, Vec<Rr>>>,
    pub zone_text: BTreeMap<String, String>,
}

fn absolute(name: &str, origin: &str) -> String {
    let name = name.to_ascii_lowercase();
    if name == "@" {
        origin.to_string()
    } else if name.ends_with('.') {
        name
    } else if origin == "." {
        format!("{name}.")
    } else {
        format!("{name}.{origin}")
    }
}

pub fn parse_zone(text: &str) -> Vec<Rr> {
    let mut origin = ".".to_string();
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap().trim();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["$ORIGIN", o] => origin = o.to_string(),
            [first, ..] if first.starts_with('$') => {}
            [owner, rest @ ..] => {
                let rest: Vec<&str> = rest
                    .iter()
                    .copied()
                    .skip_while(|t| t.parse::<u32>().is_ok() || t.eq_ignore_ascii_case("IN"))
                    .collect();
                let Some((rtype, rdata)) = rest.split_first() else {
                    continue;
                };
                let rtype = rtype.to_ascii_uppercase();
                let rdata = match rtype.as_str() {
                    "NS" | "CNAME" => absolute(rdata[0], &origin),
                    _ => rdata.join(" "),
                };
                out.push(Rr {
                    owner: absolute(owner, &origin),
                    rtype,
                    rdata,
                });
            }
        }
    }
    out
}

/// `zone "X" { ... file "F"; };` pairs.
fn named_zones(conf: &str) -> Vec<(String, String)> {
    conf.lines()
        .filter_map(|l| {
            let l = l.trim();
            let rest = l.strip_prefix("zone \"")?;
            let (apex, rest) = rest.split_once('"')?;
            let file = rest.split("file \"").nth(1)?.split('"').next()?;
            Some((apex.to_string(), file.to_string()))
        })
        .collect()
}

pub fn load(dir: &Path) -> Tree {
    let manifest: serde_yaml::Value =
        serde_yaml::from_str(&std::fs::read_to_string(dir.join("docker-compose.yml")).unwrap())
            .unwrap();
    let mut addresses = BTreeMap::new();
    let mut zones = BTreeMap::new();
    let mut zone_text = BTreeMap::new();
    for (name, svc) in manifest["services"].as_mapping().unwrap() {
        let name = name.as_str().unwrap().to_string();
        let addrs = svc["networks"]
            .as_mapping()
            .map(|m| {
                m.values()
                    .filter_map(|v| v["ipv4_address"].as_str()?.parse().ok())
                    .collect()
            })
            .unwrap_or_default();
        addresses.insert(name.clone(), addrs);
        let files = dir.join(&name).join("files");
        let Ok(conf) = std::fs::read_to_string(files.join("etc/bind/named.conf")) else {
            continue;
        };
        let mut served = BTreeMap::new();
        for (apex, file) in named_zones(&conf) {
            let text = std::fs::read_to_string(files.join(file.trim_start_matches('/'))).unwrap();
            served.insert(apex.clone(), parse_zone(&text));
            zone_text.entry(apex).or_insert(text);
        }
        zones.insert(name, served);
    }
    Tree {
        addresses,
        zones,
        zone_text,
    }
}

fn in_zone(name: &str, apex: &str) -> bool {
    apex == "." || name == apex || name.ends_with(&format!(".{apex}"))
}

/// One step of a walk: the server asked and the zone that answered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub server: Ipv4Addr,
    pub zone: String,
}

impl Tree {
    fn server_zones(&self, addr: Ipv4Addr) -> Option<&BTreeMap<String, Vec<Rr>>> {
        let (name, _) = self.addresses.iter().find(|(_, a)| a.contains(&addr))?;
        self.zones.get(name)
    }

    pub fn root_servers(&self) -> Vec<Ipv4Addr> {
        self.zones
            .iter()
            .filter(|(_, z)| z.contains_key("."))
            .flat_map(|(name, _)| self.addresses[name].iter().copied())
            .collect()
    }

    /// Follows referrals from a root server until an A record answers.
    pub fn walk(&self, qname: &str) -> Result<(Ipv4Addr, Vec<Step>), String> {
        let qname = qname.to_ascii_lowercase();
        let mut server = *self.root_servers().first().ok_or("no root server")?;
        let mut steps = Vec::new();
        for _ in 0..16 {
            let zones = self
                .server_zones(server)
                .ok_or_else(|| format!("{server} serves nothing"))?;
            let (apex, records) = zones
                .iter()
                .filter(|(apex, _)| in_zone(&qname, apex))
                .max_by_key(|(apex, _)| apex.len())
                .ok_or_else(|| format!("{server} is not authoritative for {qname}"))?;
            steps.push(Step {
                server,
                zone: apex.clone(),
            });
            if let Some(a) = records.iter().find(|r| r.owner == qname && r.rtype == "A") {
                return Ok((a.rdata.parse().map_err(|_| "bad A")?, steps));
            }
            let cut = records
                .iter()
                .filter(|r| r.rtype == "NS" && r.owner != *apex && in_zone(&qname, &r.owner))
                .max_by_key(|r| r.owner.len())
                .ok_or_else(|| format!("{apex} has no answer or referral for {qname}"))?;
            let glue = records
                .iter()
                .find(|r| r.owner == cut.rdata && r.rtype == "A")
                .ok_or_else(|| format!("{apex}: no glue for {}", cut.rdata))?;
            server = glue.rdata.parse().map_err(|_| "bad glue")?;
        }
        Err(format!("referral loop for {qname}"))
    }
}

pub fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}
