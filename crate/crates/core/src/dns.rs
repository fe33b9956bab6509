//! DNS infrastructure as a portable service layer.
//!
//! Nameservers are virtual nodes: [`DnsLayer::install`] only records a name.
//! At render time each name is bound to a physical host, zone files are
//! synthesized (SOA, NS, delegations with glue) and copied onto that host.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::base::{Base, FileEntry, FileSource, NodeFragment, NodeKey};
use crate::{Error, Result};

pub const ZONE_DIR: &str = "/etc/zones";
pub const NAMED_CONF: &str = "/etc/bind/named.conf";
pub const DEFAULT_TTL: u32 = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordType {
    A,
    NS,
    CNAME,
    MX,
    TXT,
}

impl std::str::FromStr for RecordType {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(RecordType::A),
            "NS" => Ok(RecordType::NS),
            "CNAME" => Ok(RecordType::CNAME),
            "MX" => Ok(RecordType::MX),
            "TXT" => Ok(RecordType::TXT),
            _ => Err(()),
        }
    }
}

/// One resource record as the user wrote it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub owner: String,
    pub ttl: Option<u32>,
    pub rtype: RecordType,
    pub rdata: String,
}

impl Record {
    /// Parses `<owner> [ttl] [IN] <type> <rdata>`.
    pub fn parse(line: &str) -> Result<Record> {
        let bad = || Error::UnparseableRecord(line.to_string());
        let mut tokens = line.split_whitespace();
        let owner = tokens.next().ok_or_else(bad)?.to_string();
        let mut next = tokens.next().ok_or_else(bad)?;
        let mut ttl = None;
        if let Ok(t) = next.parse::<u32>() {
            ttl = Some(t);
            next = tokens.next().ok_or_else(bad)?;
        }
        if next.eq_ignore_ascii_case("IN") {
            next = tokens.next().ok_or_else(bad)?;
        }
        let rtype: RecordType = next.parse().map_err(|_| bad())?;
        let rdata: Vec<&str> = tokens.collect();
        if rdata.is_empty() {
            return Err(bad());
        }
        let valid = match rtype {
            RecordType::A => rdata.len() == 1 && rdata[0].parse::<Ipv4Addr>().is_ok(),
            RecordType::NS | RecordType::CNAME => rdata.len() == 1,
            RecordType::MX => rdata.len() == 2 && rdata[0].parse::<u16>().is_ok(),
            RecordType::TXT => true,
        };
        if !valid {
            return Err(bad());
        }
        Ok(Record {
            owner,
            ttl,
            rtype,
            rdata: rdata.join(" "),
        })
    }

    /// Owner name made absolute against `origin`.
    pub fn absolute_owner(&self, origin: &str) -> String {
        absolutize(&self.owner, origin)
    }
}

impl std::fmt::Display for Record {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.owner)?;
        if let Some(ttl) = self.ttl {
            write!(f, " {ttl}")?;
        }
        write!(f, " {:?} {}", self.rtype, self.rdata)
    }
}

fn absolutize(name: &str, origin: &str) -> String {
    if name == "@" {
        origin.to_string()
    } else if name.ends_with('.') {
        name.to_ascii_lowercase()
    } else if origin == "." {
        format!("{}.", name.to_ascii_lowercase())
    } else {
        format!("{}.{origin}", name.to_ascii_lowercase())
    }
}

/// Validates and lowercases a dot-terminated name.
pub fn normalize_fqdn(fqdn: &str) -> Result<String> {
    let bad = || Error::MalformedFqdn(fqdn.to_string());
    if fqdn == "." {
        return Ok(".".to_string());
    }
    let body = fqdn.strip_suffix('.').ok_or_else(bad)?;
    for label in body.split('.') {
        let ok = !label.is_empty()
            && label.len() <= 63
            && label
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
            && !label.starts_with('-');
        if !ok {
            return Err(bad());
        }
    }
    Ok(fqdn.to_ascii_lowercase())
}

/// `example.com.` -> `com.`, `com.` -> `.`, `.` -> `None`.
pub fn parent_zone(fqdn: &str) -> Option<String> {
    if fqdn == "." {
        return None;
    }
    match fqdn.split_once('.') {
        Some((_, rest)) if !rest.is_empty() => Some(rest.to_string()),
        _ => Some(".".to_string()),
    }
}

/// Whether `name` equals `zone` or sits below it.
pub fn in_zone(name: &str, zone: &str) -> bool {
    zone == "." || name == zone || name.ends_with(&format!(".{zone}"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub fqdn: String,
    pub records: Vec<Record>,
    pub master: Option<String>,
}

/// The DNS service layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsLayer {
    /// Virtual node -> zones it serves, in install order.
    nameservers: IndexMap<String, Vec<String>>,
    zones: BTreeMap<String, Zone>,
}

impl DnsLayer {
    pub fn new() -> Self {
        DnsLayer::default()
    }

    /// Creates the virtual nameserver if it does not exist yet.
    pub fn install(&mut self, vnode: &str) -> NameserverHandle<'_> {
        self.nameservers.entry(vnode.to_string()).or_default();
        NameserverHandle {
            layer: self,
            vnode: vnode.to_string(),
        }
    }

    /// Returns the zone, creating it and any missing ancestors.
    pub fn get_zone(&mut self, fqdn: &str) -> Result<ZoneHandle<'_>> {
        let fqdn = self.ensure_zone(fqdn)?;
        Ok(ZoneHandle { layer: self, fqdn })
    }

    pub fn zone(&self, fqdn: &str) -> Option<&Zone> {
        self.zones.get(fqdn)
    }

    pub fn zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.values()
    }

    pub fn virtual_nodes(&self) -> impl Iterator<Item = &str> {
        self.nameservers.keys().map(String::as_str)
    }

    /// Nameserver virtual nodes of a zone, in install order.
    pub fn nameservers_of(&self, fqdn: &str) -> Vec<&str> {
        self.nameservers
            .iter()
            .filter(|(_, zones)| zones.iter().any(|z| z == fqdn))
            .map(|(ns, _)| ns.as_str())
            .collect()
    }

    fn ensure_zone(&mut self, fqdn: &str) -> Result<String> {
        let fqdn = normalize_fqdn(fqdn)?;
        let mut cursor = Some(fqdn.clone());
        while let Some(name) = cursor {
            self.zones.entry(name.clone()).or_insert_with(|| Zone {
                fqdn: name.clone(),
                records: Vec::new(),
                master: None,
            });
            cursor = parent_zone(&name);
        }
        Ok(fqdn)
    }

    fn children_of(&self, fqdn: &str) -> Vec<&Zone> {
        self.zones
            .values()
            .filter(|z| parent_zone(&z.fqdn).as_deref() == Some(fqdn))
            .collect()
    }

    /// Synthesizes zone files and the per-node configuration fragments.
    pub(crate) fn configure(
        &self,
        base: &Base,
        bindings: &BTreeMap<String, NodeKey>,
        serial: u32,
    ) -> Result<DnsOutput> {
        let address_of = |vnode: &str| -> Result<Ipv4Addr> {
            let key = bindings
                .get(vnode)
                .ok_or_else(|| Error::UnboundNameserver(vnode.to_string()))?;
            base.node(key)
                .and_then(|n| n.first_address())
                .ok_or_else(|| Error::UnboundNameserver(vnode.to_string()))
        };

        // glue: (ns hostname, address) per zone
        let mut servers: BTreeMap<&str, Vec<(String, Ipv4Addr, &str)>> = BTreeMap::new();
        for zone in self.zones.values() {
            let names = self.nameservers_of(&zone.fqdn);
            if names.is_empty() {
                return Err(Error::OrphanZone(zone.fqdn.clone()));
            }
            let mut list = Vec::new();
            for (i, vnode) in names.iter().enumerate() {
                let host = if zone.fqdn == "." {
                    format!("ns{}.", i + 1)
                } else {
                    format!("ns{}.{}", i + 1, zone.fqdn)
                };
                list.push((host, address_of(vnode)?, *vnode));
            }
            servers.insert(zone.fqdn.as_str(), list);
        }

        let mut zones = Vec::new();
        for zone in self.zones.values() {
            let own = &servers[zone.fqdn.as_str()];
            let mut text = String::new();
            let _ = writeln!(text, "$ORIGIN {}", zone.fqdn);
            let _ = writeln!(text, "$TTL {DEFAULT_TTL}");
            let hostmaster = if zone.fqdn == "." {
                "hostmaster.".to_string()
            } else {
                format!("hostmaster.{}", zone.fqdn)
            };
            let _ = writeln!(
                text,
                "@ IN SOA {} {hostmaster} {serial} 7200 3600 1209600 {DEFAULT_TTL}",
                own[0].0
            );
            for (host, _, _) in own {
                let _ = writeln!(text, "@ IN NS {host}");
            }
            for (host, addr, _) in own {
                let _ = writeln!(text, "{host} IN A {addr}");
            }
            for record in &zone.records {
                let _ = writeln!(text, "{record}");
            }
            for child in self.children_of(&zone.fqdn) {
                for (host, _, _) in &servers[child.fqdn.as_str()] {
                    let _ = writeln!(text, "{} IN NS {host}", child.fqdn);
                }
                for (host, addr, _) in &servers[child.fqdn.as_str()] {
                    let _ = writeln!(text, "{host} IN A {addr}");
                }
            }
            let master_addr = match &zone.master {
                Some(m) => Some(address_of(m)?),
                None => None,
            };
            let serving = own
                .iter()
                .map(|(_, _, vnode)| {
                    let key = bindings[*vnode].clone();
                    let primary = zone.master.is_none() || zone.master.as_deref() == Some(*vnode);
                    (key, primary)
                })
                .collect();
            zones.push(RenderedZone {
                fqdn: zone.fqdn.clone(),
                servers: serving,
                master_address: master_addr,
                text,
            });
        }

        let mut fragments = BTreeMap::new();
        for (vnode, served) in &self.nameservers {
            if served.is_empty() {
                continue;
            }
            let key = bindings
                .get(vnode)
                .ok_or_else(|| Error::UnboundNameserver(vnode.clone()))?;
            let mut fragment = NodeFragment::default();
            fragment.software.insert("bind9".to_string());
            let mut conf = String::from(
                "options {\n    directory \"/etc/zones\";\n    recursion no;\n    allow-transfer { any; };\n};\n",
            );
            for fqdn in served {
                let rz = zones
                    .iter()
                    .find(|z| z.fqdn == *fqdn)
                    .expect("zone rendered");
                let path = zone_file_path(fqdn);
                let primary = rz.servers.iter().any(|(k, p)| k == key && *p);
                conf.push('\n');
                if primary {
                    let _ = writeln!(conf, "zone \"{fqdn}\" {{ type master; file \"{path}\"; }};");
                } else {
                    let master = rz.master_address.expect("secondary implies a master");
                    let _ = writeln!(
                        conf,
                        "zone \"{fqdn}\" {{ type slave; masters {{ {master}; }}; file \"{path}\"; }};"
                    );
                }
                fragment.files.push(FileEntry {
                    path,
                    source: FileSource::Inline(rz.text.clone()),
                });
            }
            fragment.files.push(FileEntry {
                path: NAMED_CONF.to_string(),
                source: FileSource::Inline(conf),
            });
            fragment
                .start_commands
                .push(format!("named -c {NAMED_CONF}"));
            fragments.insert(key.clone(), fragment);
        }
        Ok(DnsOutput { zones, fragments })
    }
}

pub(crate) struct DnsOutput {
    pub zones: Vec<RenderedZone>,
    pub fragments: BTreeMap<NodeKey, NodeFragment>,
}

/// `/etc/zones/<fqdn>zone`.
pub fn zone_file_path(fqdn: &str) -> String {
    format!("{ZONE_DIR}/{fqdn}zone")
}

/// A zone file as emitted, plus the nodes that serve it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedZone {
    pub fqdn: String,
    /// Serving nodes; `true` marks a primary copy.
    pub servers: Vec<(NodeKey, bool)>,
    pub master_address: Option<Ipv4Addr>,
    pub text: String,
}

#[derive(Debug)]
pub struct NameserverHandle<'a> {
    layer: &'a mut DnsLayer,
    vnode: String,
}

impl<'a> NameserverHandle<'a> {
    pub fn add_zone(self, fqdn: &str) -> Result<Self> {
        let fqdn = self.layer.ensure_zone(fqdn)?;
        let served = self
            .layer
            .nameservers
            .get_mut(&self.vnode)
            .expect("installed");
        if !served.contains(&fqdn) {
            served.push(fqdn);
        }
        Ok(self)
    }

    /// Marks this nameserver as master of every zone it serves so far.
    pub fn set_master(self) -> Result<Self> {
        let served = self.layer.nameservers[&self.vnode].clone();
        for fqdn in &served {
            let zone = &self.layer.zones[fqdn];
            if let Some(existing) = &zone.master {
                if *existing != self.vnode {
                    return Err(Error::SecondMaster(fqdn.clone()));
                }
            }
        }
        for fqdn in served {
            self.layer.zones.get_mut(&fqdn).expect("exists").master = Some(self.vnode.clone());
        }
        Ok(self)
    }
}

#[derive(Debug)]
pub struct ZoneHandle<'a> {
    layer: &'a mut DnsLayer,
    fqdn: String,
}

impl<'a> ZoneHandle<'a> {
    pub fn add_record(self, line: &str) -> Result<Self> {
        let record = Record::parse(line)?;
        self.layer
            .zones
            .get_mut(&self.fqdn)
            .expect("zone exists")
            .records
            .push(record);
        Ok(self)
    }

    pub fn fqdn(&self) -> &str {
        &self.fqdn
    }
}

/// A record from an emitted zone file with its owner made absolute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZoneEntry {
    pub owner: String,
    pub rtype: String,
    pub rdata: String,
}

/// Parses emitted zone text. `$ORIGIN` is honored; SOA lines are skipped.
pub fn parse_zone_text(text: &str) -> Vec<ZoneEntry> {
    let mut origin = ".".to_string();
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(o) = line.strip_prefix("$ORIGIN") {
            origin = o.trim().to_string();
            continue;
        }
        if line.starts_with('$') {
            continue;
        }
        let Ok(record) = Record::parse(line) else {
            continue;
        };
        out.push(ZoneEntry {
            owner: record.absolute_owner(&origin),
            rtype: format!("{:?}", record.rtype),
            rdata: match record.rtype {
                RecordType::NS | RecordType::CNAME => absolutize(&record.rdata, &origin),
                _ => record.rdata.clone(),
            },
        });
    }
    out
}

/// Iterative resolution over rendered zones, starting from the root
/// servers. Follows delegations through glue and CNAMEs.
pub fn resolve(zones: &[RenderedZone], base: &Base, name: &str) -> Option<Ipv4Addr> {
    let qname = normalize_fqdn(name).ok()?;
    // server address -> zones it serves
    let mut served: BTreeMap<Ipv4Addr, BTreeMap<&str, Vec<ZoneEntry>>> = BTreeMap::new();
    for zone in zones {
        for (key, _) in &zone.servers {
            let addr = base.node(key)?.first_address()?;
            served
                .entry(addr)
                .or_default()
                .insert(zone.fqdn.as_str(), parse_zone_text(&zone.text));
        }
    }
    let root = zones.iter().find(|z| z.fqdn == ".")?;
    let mut server = base.node(&root.servers.first()?.0)?.first_address()?;
    let mut qname = qname;
    let mut seen = BTreeSet::new();
    loop {
        if !seen.insert((server, qname.clone())) {
            return None;
        }
        let zones_here = served.get(&server)?;
        let (apex, entries) = zones_here
            .iter()
            .filter(|(apex, _)| in_zone(&qname, apex))
            .max_by_key(|(apex, _)| apex.len())?;
        if let Some(a) = entries.iter().find(|e| e.owner == qname && e.rtype == "A") {
            return a.rdata.parse().ok();
        }
        if let Some(c) = entries
            .iter()
            .find(|e| e.owner == qname && e.rtype == "CNAME")
        {
            qname = c.rdata.clone();
            server = base.node(&root.servers.first()?.0)?.first_address()?;
            continue;
        }
        // closest delegation below the apex
        let cut = entries
            .iter()
            .filter(|e| e.rtype == "NS" && e.owner != *apex && in_zone(&qname, &e.owner))
            .max_by_key(|e| e.owner.len())?;
        let glue = entries
            .iter()
            .find(|e| e.owner == cut.rdata && e.rtype == "A")?;
        server = glue.rdata.parse().ok()?;
    }
}
