//! Reads BGP sessions back out of emitted BIRD configuration text.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BgpProtocol {
    pub name: String,
    pub local: Ipv4Addr,
    pub neighbor: Ipv4Addr,
    /// `None` for sessions inside the local AS.
    pub neighbor_as: Option<u32>,
}

/// Name, local address and the (neighbor, neighbor AS) of a protocol being read.
type Partial = (String, Option<Ipv4Addr>, Option<(Ipv4Addr, Option<u32>)>);

pub fn bgp_protocols(conf: &str) -> Vec<BgpProtocol> {
    let mut out = Vec::new();
    let mut current: Option<Partial> = None;
    for line in conf.lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix("protocol bgp ") {
            current = Some((rest.trim_end_matches(" {").to_string(), None, None));
            continue;
        }
        let Some(cur) = current.as_mut() else {
            continue;
        };
        let words: Vec<&str> = line.trim_end_matches(';').split_whitespace().collect();
        match words.as_slice() {
            ["local", addr, "as", _] => cur.1 = addr.parse().ok(),
            ["neighbor", addr, "as", asn] => {
                cur.2 = Some((addr.parse().unwrap(), asn.parse().ok()));
            }
            ["}"] if cur.1.is_some() && cur.2.is_some() => {
                let (name, local, far) = current.take().unwrap();
                let (neighbor, neighbor_as) = far.unwrap();
                out.push(BgpProtocol {
                    name,
                    local: local.unwrap(),
                    neighbor,
                    neighbor_as,
                });
            }
            _ => {}
        }
    }
    out
}

/// Undirected internal session pairs across a set of configs; errors when a
/// session is configured on one side only.
pub fn ibgp_pairs(configs: &[String]) -> Result<BTreeSet<(Ipv4Addr, Ipv4Addr)>, String> {
    let mut directed = BTreeSet::new();
    for conf in configs {
        for p in bgp_protocols(conf)
            .into_iter()
            .filter(|p| p.neighbor_as.is_none())
        {
            directed.insert((p.local, p.neighbor));
        }
    }
    let mut pairs = BTreeSet::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) {
            return Err(format!("{a} -> {b} has no reverse session"));
        }
        pairs.insert((a.min(b), a.max(b)));
    }
    Ok(pairs)
}

/// Every `files/etc/bird/bird.conf` under a compiled output tree, by
/// container name.
pub fn configs_in(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let conf = entry.path().join("files/etc/bird/bird.conf");
        if let Ok(text) = std::fs::read_to_string(conf) {
            out.push((entry.file_name().to_string_lossy().into_owned(), text));
        }
    }
    out.sort();
    out
}
