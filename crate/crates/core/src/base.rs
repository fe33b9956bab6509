//! The physical layer: internet exchanges, autonomous systems, networks and
//! the nodes attached to them.
//!
//! Builder handles borrow the [`Base`] mutably and hand themselves back from
//! every call, so a topology reads as a chain:
//!
//! ```
//! # use emu_core::base::Base;
//! # fn main() -> emu_core::Result<()> {
//! let mut base = Base::new();
//! base.create_internet_exchange(100)?;
//! let mut as150 = base.create_autonomous_system(150)?;
//! as150.create_network("net0")?;
//! as150.create_router("router0")?.join_network("net0")?.join_network("ix100")?;
//! as150.create_host("host0")?.join_network("net0")?;
//! # Ok(())
//! # }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::PathBuf;
use std::sync::Arc;

use indexmap::IndexMap;
use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::{Asn, Error, Result};

/// Loopback addresses for routers are carved out of this block.
pub const LOOPBACK_BLOCK: Ipv4Net = match Ipv4Net::new(Ipv4Addr::new(10, 0, 0, 0), 16) {
    Ok(net) => net,
    Err(_) => panic!("invalid loopback block"),
};

const FIRST_HOST_OFFSET: u32 = 71;
const FIRST_ROUTER_OFFSET: u32 = 254;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Host,
    Router,
    RouteServer,
    RealWorldRouter,
}

impl Role {
    /// Short code used in container names.
    pub fn code(self) -> &'static str {
        match self {
            Role::Host => "h",
            Role::Router => "r",
            Role::RouteServer => "rs",
            Role::RealWorldRouter => "rw",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Host => "host",
            Role::Router => "router",
            Role::RouteServer => "route_server",
            Role::RealWorldRouter => "real_world_router",
        }
    }

    /// Routers and real-world routers forward packets and speak BGP.
    pub fn is_router(self) -> bool {
        matches!(self, Role::Router | Role::RealWorldRouter)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a network or node lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    As(Asn),
    Ix(u32),
}

impl Scope {
    /// Registry scope text: the ASN in decimal, or `ix`.
    pub fn registry_text(self) -> String {
        match self {
            Scope::As(asn) => asn.to_string(),
            Scope::Ix(_) => "ix".to_string(),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::As(asn) => write!(f, "as{asn}"),
            Scope::Ix(id) => write!(f, "ix{id}"),
        }
    }
}

/// Identity of a node across the whole emulation. Serialized as `as150/host0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct NodeKey {
    pub scope: Scope,
    pub name: String,
}

impl NodeKey {
    pub fn new(scope: Scope, name: impl Into<String>) -> Self {
        NodeKey {
            scope,
            name: name.into(),
        }
    }

    pub fn in_as(asn: Asn, name: impl Into<String>) -> Self {
        NodeKey::new(Scope::As(asn), name)
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scope, self.name)
    }
}

impl std::str::FromStr for NodeKey {
    type Err = Error;

    /// Parses `as150/host0` or `ix100/ix100`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownNode(s.to_string());
        let (scope, name) = s.split_once('/').ok_or_else(bad)?;
        let scope = if let Some(n) = scope.strip_prefix("as") {
            Scope::As(n.parse().map_err(|_| bad())?)
        } else if let Some(n) = scope.strip_prefix("ix") {
            Scope::Ix(n.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        if name.is_empty() {
            return Err(bad());
        }
        Ok(NodeKey::new(scope, name))
    }
}

impl From<NodeKey> for String {
    fn from(k: NodeKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for NodeKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteAccessSpec {
    pub service: RemoteAccessKind,
    pub exposed_port: u16,
    /// Filled in at render time from the network's host pool.
    pub address: Option<Ipv4Addr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemoteAccessKind {
    OpenVpn,
}

impl RemoteAccessSpec {
    pub fn openvpn(exposed_port: u16) -> Self {
        RemoteAccessSpec {
            service: RemoteAccessKind::OpenVpn,
            exposed_port,
            address: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub prefix: Ipv4Net,
    pub scope: Scope,
    pub remote_access: Option<RemoteAccessSpec>,
    used: BTreeMap<Ipv4Addr, String>,
    next_host: u32,
    next_router: u32,
}

impl Network {
    fn new(name: impl Into<String>, prefix: Ipv4Net, scope: Scope) -> Self {
        Network {
            name: name.into(),
            prefix: prefix.trunc(),
            scope,
            remote_access: None,
            used: BTreeMap::new(),
            next_host: FIRST_HOST_OFFSET,
            next_router: FIRST_ROUTER_OFFSET,
        }
    }

    pub fn is_exchange(&self) -> bool {
        matches!(self.scope, Scope::Ix(_))
    }

    /// Unique name across the emulation: `ix100` or `as150/net0`.
    pub fn qualified_name(&self) -> String {
        match self.scope {
            Scope::Ix(_) => self.name.clone(),
            Scope::As(asn) => format!("as{asn}/{}", self.name),
        }
    }

    /// Addresses in use and who holds them.
    pub fn used_addresses(&self) -> impl Iterator<Item = (&Ipv4Addr, &String)> {
        self.used.iter()
    }

    fn offset_address(&self, offset: u32) -> Option<Ipv4Addr> {
        let size = 1u64 << (32 - self.prefix.prefix_len());
        if offset == 0 || u64::from(offset) >= size.saturating_sub(1) {
            return None;
        }
        Some(Ipv4Addr::from(u32::from(self.prefix.network()) + offset))
    }

    fn claim(&mut self, addr: Ipv4Addr, holder: String) -> Result<Ipv4Addr> {
        if !self.prefix.contains(&addr) {
            return Err(Error::AddressOutOfPrefix(addr, self.prefix));
        }
        if self.used.contains_key(&addr) {
            return Err(Error::AddressInUse(addr, self.name.clone()));
        }
        self.used.insert(addr, holder);
        Ok(addr)
    }

    fn next_host_address(&mut self) -> Result<Ipv4Addr> {
        loop {
            let addr = self
                .offset_address(self.next_host)
                .ok_or_else(|| Error::AddressPoolExhausted(self.name.clone()))?;
            self.next_host += 1;
            if !self.used.contains_key(&addr) {
                return Ok(addr);
            }
        }
    }

    fn next_router_address(&mut self) -> Result<Ipv4Addr> {
        loop {
            if self.next_router == 0 {
                return Err(Error::AddressPoolExhausted(self.name.clone()));
            }
            let offset = self.next_router;
            self.next_router -= 1;
            if let Some(addr) = self.offset_address(offset) {
                if !self.used.contains_key(&addr) {
                    return Ok(addr);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    /// AS-local network name, or `ix{id}` for an exchange.
    pub network: String,
    pub address: Ipv4Addr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileSource {
    Inline(String),
    HostPath(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub source: FileSource,
}

/// Supplies the prefixes a real-world router announces into the emulation.
#[derive(Clone)]
pub enum PrefixSource {
    Static(Vec<Ipv4Net>),
    Provider(Arc<dyn Fn(Asn) -> Vec<Ipv4Net> + Send + Sync>),
}

impl fmt::Debug for PrefixSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrefixSource::Static(list) => f.debug_tuple("Static").field(list).finish(),
            PrefixSource::Provider(_) => f.write_str("Provider(..)"),
        }
    }
}

impl PrefixSource {
    fn resolve(&self, asn: Asn) -> Vec<Ipv4Net> {
        match self {
            PrefixSource::Static(list) => list.clone(),
            PrefixSource::Provider(hook) => hook(asn),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub asn: Asn,
    pub role: Role,
    pub interfaces: Vec<Interface>,
    pub software: BTreeSet<String>,
    pub files: Vec<FileEntry>,
    pub build_commands: Vec<String>,
    pub start_commands: Vec<String>,
    pub display_name: Option<String>,
    pub description: Option<String>,
    /// Prefixes announced by a real-world router, resolved at render.
    pub announced: Vec<Ipv4Net>,
    #[serde(skip)]
    prefix_source: Option<PrefixSource>,
}

impl Node {
    fn new(name: impl Into<String>, asn: Asn, role: Role) -> Self {
        Node {
            name: name.into(),
            asn,
            role,
            interfaces: Vec::new(),
            software: BTreeSet::new(),
            files: Vec::new(),
            build_commands: Vec::new(),
            start_commands: Vec::new(),
            display_name: None,
            description: None,
            announced: Vec::new(),
            prefix_source: None,
        }
    }

    pub fn key(&self) -> NodeKey {
        let scope = match self.role {
            Role::RouteServer => Scope::Ix(self.asn),
            _ => Scope::As(self.asn),
        };
        NodeKey::new(scope, self.name.clone())
    }

    /// A router attached to at least one exchange network.
    pub fn is_bgp_router(&self) -> bool {
        self.role.is_router() && self.interfaces.iter().any(|i| is_exchange_name(&i.network))
    }

    pub fn interface_on(&self, network: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.network == network)
    }

    pub fn first_address(&self) -> Option<Ipv4Addr> {
        self.interfaces.first().map(|i| i.address)
    }

    pub(crate) fn apply_service(&mut self, fragment: &NodeFragment) {
        self.software.extend(fragment.software.iter().cloned());
        self.files.extend(fragment.files.iter().cloned());
        self.build_commands
            .extend(fragment.build_commands.iter().cloned());
        self.start_commands
            .extend(fragment.start_commands.iter().cloned());
    }
}

/// Configuration a service contributes to the physical node it is bound to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFragment {
    #[serde(default)]
    pub software: BTreeSet<String>,
    #[serde(default)]
    pub files: Vec<FileEntry>,
    #[serde(default)]
    pub build_commands: Vec<String>,
    #[serde(default)]
    pub start_commands: Vec<String>,
}

/// Parses `ix100` into `100`.
pub fn exchange_id(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("ix")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn is_exchange_name(name: &str) -> bool {
    exchange_id(name).is_some()
}

fn validate_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.len() <= 48
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidName(name.to_string()))
    }
}

fn validate_id(id: u32) -> Result<()> {
    if (2..=65535).contains(&id) {
        Ok(())
    } else {
        Err(Error::InvalidId(id))
    }
}

fn require_absolute(path: &str) -> Result<()> {
    if path.starts_with('/') {
        Ok(())
    } else {
        Err(Error::RelativePath(path.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InternetExchange {
    pub id: u32,
    pub network: Network,
    pub route_server: Option<Node>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AutonomousSystem {
    pub asn: Asn,
    pub networks: IndexMap<String, Network>,
    pub nodes: IndexMap<String, Node>,
}

impl AutonomousSystem {
    pub fn routers(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.role.is_router())
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.role == Role::Host)
    }
}

/// The base layer model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Base {
    exchanges: BTreeMap<u32, InternetExchange>,
    ases: BTreeMap<Asn, AutonomousSystem>,
}

impl Base {
    pub fn new() -> Self {
        Base::default()
    }

    pub fn create_internet_exchange(&mut self, id: u32) -> Result<&mut InternetExchange> {
        validate_id(id)?;
        if id > 255 {
            return Err(Error::ExplicitPrefixRequired(format!("ix{id}")));
        }
        let prefix = Ipv4Net::new(Ipv4Addr::new(10, id as u8, 0, 0), 24).expect("valid /24");
        self.create_internet_exchange_with_prefix(id, prefix)
    }

    pub fn create_internet_exchange_with_prefix(
        &mut self,
        id: u32,
        prefix: Ipv4Net,
    ) -> Result<&mut InternetExchange> {
        validate_id(id)?;
        if self.exchanges.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.check_overlap(prefix)?;
        let network = Network::new(format!("ix{id}"), prefix, Scope::Ix(id));
        Ok(self.exchanges.entry(id).or_insert(InternetExchange {
            id,
            network,
            route_server: None,
        }))
    }

    pub fn create_autonomous_system(&mut self, asn: Asn) -> Result<AsBuilder<'_>> {
        validate_id(asn)?;
        if self.ases.contains_key(&asn) {
            return Err(Error::DuplicateId(asn));
        }
        self.ases.insert(
            asn,
            AutonomousSystem {
                asn,
                networks: IndexMap::new(),
                nodes: IndexMap::new(),
            },
        );
        Ok(AsBuilder { base: self, asn })
    }

    pub fn autonomous_system_mut(&mut self, asn: Asn) -> Result<AsBuilder<'_>> {
        if !self.ases.contains_key(&asn) {
            return Err(Error::UnknownAs(asn));
        }
        Ok(AsBuilder { base: self, asn })
    }

    pub fn autonomous_system(&self, asn: Asn) -> Option<&AutonomousSystem> {
        self.ases.get(&asn)
    }

    pub fn autonomous_systems(&self) -> impl Iterator<Item = &AutonomousSystem> {
        self.ases.values()
    }

    pub fn internet_exchange(&self, id: u32) -> Option<&InternetExchange> {
        self.exchanges.get(&id)
    }

    pub fn internet_exchanges(&self) -> impl Iterator<Item = &InternetExchange> {
        self.exchanges.values()
    }

    /// Handle to an exchange network, e.g. to try enabling remote access on it.
    pub fn exchange_network_mut(&mut self, id: u32) -> Result<NetworkBuilder<'_>> {
        if !self.exchanges.contains_key(&id) {
            return Err(Error::UnknownNetwork(format!("ix{id}")));
        }
        Ok(NetworkBuilder {
            base: self,
            scope: Scope::Ix(id),
            name: format!("ix{id}"),
        })
    }

    /// All nodes: AS nodes by ASN then creation order, then route servers.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.ases.values().flat_map(|a| a.nodes.values()).chain(
            self.exchanges
                .values()
                .filter_map(|ix| ix.route_server.as_ref()),
        )
    }

    pub fn node(&self, key: &NodeKey) -> Option<&Node> {
        match key.scope {
            Scope::As(asn) => self.ases.get(&asn)?.nodes.get(&key.name),
            Scope::Ix(id) => self
                .exchanges
                .get(&id)?
                .route_server
                .as_ref()
                .filter(|rs| rs.name == key.name),
        }
    }

    pub(crate) fn node_mut(&mut self, key: &NodeKey) -> Option<&mut Node> {
        match key.scope {
            Scope::As(asn) => self.ases.get_mut(&asn)?.nodes.get_mut(&key.name),
            Scope::Ix(id) => self
                .exchanges
                .get_mut(&id)?
                .route_server
                .as_mut()
                .filter(|rs| rs.name == key.name),
        }
    }

    /// All networks: exchanges first, then AS networks.
    pub fn networks(&self) -> impl Iterator<Item = &Network> {
        self.exchanges
            .values()
            .map(|ix| &ix.network)
            .chain(self.ases.values().flat_map(|a| a.networks.values()))
    }

    /// Resolves a network name as seen from `asn`.
    pub fn network_for(&self, asn: Asn, name: &str) -> Option<&Network> {
        match exchange_id(name) {
            Some(id) => self.exchanges.get(&id).map(|ix| &ix.network),
            None => self.ases.get(&asn)?.networks.get(name),
        }
    }

    fn network_for_mut(&mut self, asn: Asn, name: &str) -> Option<&mut Network> {
        match exchange_id(name) {
            Some(id) => self.exchanges.get_mut(&id).map(|ix| &mut ix.network),
            None => self.ases.get_mut(&asn)?.networks.get_mut(name),
        }
    }

    fn check_overlap(&self, prefix: Ipv4Net) -> Result<()> {
        if overlaps(prefix, LOOPBACK_BLOCK) {
            return Err(Error::PrefixOverlap(prefix, "the loopback block".into()));
        }
        for net in self.networks() {
            if overlaps(prefix, net.prefix) {
                return Err(Error::PrefixOverlap(prefix, net.qualified_name()));
            }
        }
        Ok(())
    }

    fn join(&mut self, key: &NodeKey, network: &str, address: Option<Ipv4Addr>) -> Result<()> {
        let node = self
            .node(key)
            .ok_or_else(|| Error::UnknownNode(key.to_string()))?;
        let (asn, role) = (node.asn, node.role);
        if node.interface_on(network).is_some() {
            return Err(Error::DuplicateName(format!("{key} on {network}")));
        }
        let net = self
            .network_for_mut(asn, network)
            .ok_or_else(|| Error::UnknownNetwork(network.to_string()))?;
        let addr = match address {
            Some(addr) => addr,
            None if net.is_exchange() => {
                let offset = match role {
                    Role::RouteServer if asn <= 254 => asn,
                    Role::RouteServer => 254,
                    _ if asn <= 254 => asn,
                    _ => {
                        return Err(Error::ExplicitAddressRequired {
                            asn,
                            network: network.to_string(),
                        })
                    }
                };
                net.offset_address(offset)
                    .ok_or_else(|| Error::AddressPoolExhausted(net.name.clone()))?
            }
            None if role.is_router() => net.next_router_address()?,
            None => net.next_host_address()?,
        };
        let addr = net.claim(addr, key.to_string())?;
        let node = self.node_mut(key).expect("checked above");
        node.interfaces.push(Interface {
            network: network.to_string(),
            address: addr,
        });
        Ok(())
    }

    fn exposed_ports(&self) -> BTreeSet<u16> {
        self.networks()
            .filter_map(|n| n.remote_access.as_ref().map(|r| r.exposed_port))
            .collect()
    }

    /// Adds a route server to exchange `id` unless one exists.
    pub(crate) fn ensure_route_server(&mut self, id: u32) -> Result<NodeKey> {
        let ix = self
            .exchanges
            .get_mut(&id)
            .ok_or_else(|| Error::UnknownNetwork(format!("ix{id}")))?;
        if let Some(rs) = &ix.route_server {
            return Ok(rs.key());
        }
        let name = format!("ix{id}");
        ix.route_server = Some(Node::new(name.clone(), id, Role::RouteServer));
        let key = NodeKey::new(Scope::Ix(id), name.clone());
        self.join(&key, &name, None)?;
        Ok(key)
    }

    /// Creates a host for a binding with action NEW on the AS's first
    /// internal network.
    pub(crate) fn create_bound_host(&mut self, asn: Asn, name: &str) -> Result<NodeKey> {
        let net = self
            .ases
            .get(&asn)
            .ok_or(Error::UnknownAs(asn))?
            .networks
            .keys()
            .next()
            .cloned()
            .ok_or_else(|| Error::UnknownNetwork(format!("as{asn}/<internal>")))?;
        let mut builder = self.autonomous_system_mut(asn)?;
        builder.create_host(name)?.join_network(&net)?;
        Ok(NodeKey::in_as(asn, name))
    }

    /// Render-time finalization: resolves real-world prefixes, gives every
    /// VPN endpoint an address and checks that every node is attached.
    pub(crate) fn finalize(&mut self) -> Result<()> {
        for asys in self.ases.values_mut() {
            for node in asys.nodes.values_mut() {
                if let Some(source) = &node.prefix_source {
                    let prefixes = source.resolve(node.asn);
                    if prefixes.is_empty() {
                        return Err(Error::EmptyPrefixSource(node.name.clone()));
                    }
                    node.announced = prefixes.into_iter().map(|p| p.trunc()).collect();
                }
            }
            for net in asys.networks.values_mut() {
                if let Some(spec) = net.remote_access.as_mut() {
                    if spec.address.is_none() {
                        let addr = net.next_host_address()?;
                        let holder = format!("as{}/vpn-{}", asys.asn, net.name);
                        net.used.insert(addr, holder);
                        net.remote_access.as_mut().expect("set").address = Some(addr);
                    }
                }
            }
        }
        if let Some(node) = self.nodes().find(|n| n.interfaces.is_empty()) {
            return Err(Error::DetachedNode(node.key().to_string()));
        }
        Ok(())
    }
}

fn overlaps(a: Ipv4Net, b: Ipv4Net) -> bool {
    a.contains(&b.network()) || b.contains(&a.network())
}

/// Builder handle for one autonomous system.
#[derive(Debug)]
pub struct AsBuilder<'a> {
    base: &'a mut Base,
    asn: Asn,
}

impl<'a> AsBuilder<'a> {
    pub fn asn(&self) -> Asn {
        self.asn
    }

    fn asys(&mut self) -> &mut AutonomousSystem {
        self.base
            .ases
            .get_mut(&self.asn)
            .expect("builder AS exists")
    }

    /// Creates the k-th network with prefix `10.{asn}.{k}.0/24`.
    pub fn create_network(&mut self, name: &str) -> Result<NetworkBuilder<'_>> {
        let k = self.asys().networks.len();
        if self.asn > 255 || k > 255 {
            return Err(Error::ExplicitPrefixRequired(format!(
                "as{}/{name}",
                self.asn
            )));
        }
        let prefix =
            Ipv4Net::new(Ipv4Addr::new(10, self.asn as u8, k as u8, 0), 24).expect("valid /24");
        self.create_network_with_prefix(name, prefix)
    }

    pub fn create_network_with_prefix(
        &mut self,
        name: &str,
        prefix: Ipv4Net,
    ) -> Result<NetworkBuilder<'_>> {
        validate_name(name)?;
        // network names double as interface names inside containers
        if is_exchange_name(name) || name.len() > 15 {
            return Err(Error::InvalidName(name.to_string()));
        }
        if self.asys().networks.contains_key(name) {
            return Err(Error::DuplicateName(format!("as{}/{name}", self.asn)));
        }
        self.base.check_overlap(prefix)?;
        let asn = self.asn;
        self.asys()
            .networks
            .insert(name.to_string(), Network::new(name, prefix, Scope::As(asn)));
        Ok(NetworkBuilder {
            base: self.base,
            scope: Scope::As(asn),
            name: name.to_string(),
        })
    }

    pub fn network(&mut self, name: &str) -> Result<NetworkBuilder<'_>> {
        if !self.asys().networks.contains_key(name) {
            return Err(Error::UnknownNetwork(name.to_string()));
        }
        Ok(NetworkBuilder {
            base: self.base,
            scope: Scope::As(self.asn),
            name: name.to_string(),
        })
    }

    fn create_node(&mut self, name: &str, role: Role) -> Result<NodeBuilder<'_>> {
        validate_name(name)?;
        let asn = self.asn;
        let asys = self.asys();
        if asys.nodes.contains_key(name) {
            return Err(Error::DuplicateName(format!("as{asn}/{name}")));
        }
        asys.nodes
            .insert(name.to_string(), Node::new(name, asn, role));
        Ok(NodeBuilder {
            base: self.base,
            key: NodeKey::in_as(asn, name),
        })
    }

    pub fn create_router(&mut self, name: &str) -> Result<NodeBuilder<'_>> {
        self.create_node(name, Role::Router)
    }

    pub fn create_host(&mut self, name: &str) -> Result<NodeBuilder<'_>> {
        self.create_node(name, Role::Host)
    }

    /// A router that announces real-world prefixes and NATs traffic out.
    pub fn create_real_world_router(
        &mut self,
        name: &str,
        prefixes: PrefixSource,
    ) -> Result<NodeBuilder<'_>> {
        if let PrefixSource::Static(list) = &prefixes {
            if list.is_empty() {
                return Err(Error::EmptyPrefixSource(name.to_string()));
            }
        }
        let asn = self.asn;
        let builder = self.create_node(name, Role::RealWorldRouter)?;
        let node = builder
            .base
            .node_mut(&NodeKey::in_as(asn, name))
            .expect("just created");
        node.prefix_source = Some(prefixes);
        Ok(builder)
    }

    pub fn node(&mut self, name: &str) -> Result<NodeBuilder<'_>> {
        if !self.asys().nodes.contains_key(name) {
            return Err(Error::UnknownNode(format!("as{}/{name}", self.asn)));
        }
        Ok(NodeBuilder {
            key: NodeKey::in_as(self.asn, name),
            base: self.base,
        })
    }

    pub fn host(&mut self, name: &str) -> Result<NodeBuilder<'_>> {
        self.node(name)
    }
}

/// Builder handle for one network.
#[derive(Debug)]
pub struct NetworkBuilder<'a> {
    base: &'a mut Base,
    scope: Scope,
    name: String,
}

impl<'a> NetworkBuilder<'a> {
    pub fn enable_remote_access(self, spec: RemoteAccessSpec) -> Result<Self> {
        let Scope::As(asn) = self.scope else {
            return Err(Error::IxNetworkNotAllowed(self.name.clone()));
        };
        if self.base.exposed_ports().contains(&spec.exposed_port) {
            return Err(Error::PortInUse(spec.exposed_port));
        }
        let net = self
            .base
            .network_for_mut(asn, &self.name)
            .expect("builder network exists");
        net.remote_access = Some(RemoteAccessSpec {
            address: None,
            ..spec
        });
        Ok(self)
    }

    pub fn prefix(&self) -> Ipv4Net {
        let asn = match self.scope {
            Scope::As(asn) => asn,
            Scope::Ix(_) => 0,
        };
        self.base
            .network_for(asn, &self.name)
            .expect("builder network exists")
            .prefix
    }
}

/// Builder handle for one node. Every method hands the handle back.
#[derive(Debug)]
pub struct NodeBuilder<'a> {
    base: &'a mut Base,
    key: NodeKey,
}

impl<'a> NodeBuilder<'a> {
    pub fn key(&self) -> &NodeKey {
        &self.key
    }

    fn node(&mut self) -> &mut Node {
        self.base.node_mut(&self.key).expect("builder node exists")
    }

    pub fn join_network(self, network: &str) -> Result<Self> {
        self.base.join(&self.key, network, None)?;
        Ok(self)
    }

    pub fn join_network_at(self, network: &str, address: Ipv4Addr) -> Result<Self> {
        self.base.join(&self.key, network, Some(address))?;
        Ok(self)
    }

    pub fn add_software(mut self, package: &str) -> Self {
        self.node().software.insert(package.to_string());
        self
    }

    pub fn set_file(mut self, path: &str, content: &str) -> Result<Self> {
        require_absolute(path)?;
        self.node().files.push(FileEntry {
            path: path.to_string(),
            source: FileSource::Inline(content.to_string()),
        });
        Ok(self)
    }

    /// Stages a file from the machine running the compiler.
    pub fn import_file(mut self, host_path: impl Into<PathBuf>, node_path: &str) -> Result<Self> {
        require_absolute(node_path)?;
        self.node().files.push(FileEntry {
            path: node_path.to_string(),
            source: FileSource::HostPath(host_path.into()),
        });
        Ok(self)
    }

    pub fn add_build_command(mut self, command: &str) -> Self {
        self.node().build_commands.push(command.to_string());
        self
    }

    pub fn append_start_command(mut self, command: &str) -> Self {
        self.node().start_commands.push(command.to_string());
        self
    }

    pub fn set_display_name(mut self, name: &str) -> Self {
        self.node().display_name = Some(name.to_string());
        self
    }

    pub fn set_description(mut self, text: &str) -> Self {
        self.node().description = Some(text.to_string());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(s: &str) -> Ipv4Net {
        s.parse().unwrap()
    }

    #[test]
    fn exchange_network_naming_and_prefix() {
        let mut base = Base::new();
        let ix = base.create_internet_exchange(100).unwrap();
        assert_eq!(ix.network.name, "ix100");
        assert_eq!(ix.network.prefix, net("10.100.0.0/24"));
        let ix = base.create_internet_exchange(102).unwrap();
        assert!(ix.network.prefix.contains(&Ipv4Addr::new(10, 102, 0, 118)));
        assert!(matches!(
            base.create_internet_exchange(100),
            Err(Error::DuplicateId(100))
        ));
        assert!(matches!(
            base.create_internet_exchange(300),
            Err(Error::ExplicitPrefixRequired(_))
        ));
        assert!(matches!(
            base.create_internet_exchange_with_prefix(300, net("10.100.0.0/16")),
            Err(Error::PrefixOverlap(..))
        ));
        base.create_internet_exchange_with_prefix(300, net("172.16.0.0/24"))
            .unwrap();
    }

    #[test]
    fn stub_as_listing() {
        let mut base = Base::new();
        base.create_internet_exchange(100).unwrap();
        let mut as150 = base.create_autonomous_system(150).unwrap();
        let prefix = as150.create_network("net0").unwrap().prefix();
        assert_eq!(prefix, net("10.150.0.0/24"));
        as150
            .create_router("router0")
            .unwrap()
            .join_network("net0")
            .unwrap()
            .join_network("ix100")
            .unwrap();
        as150
            .create_host("host0")
            .unwrap()
            .join_network("net0")
            .unwrap();
        as150
            .create_host("host1")
            .unwrap()
            .join_network("net0")
            .unwrap();
        assert!(matches!(
            as150.create_network("net0"),
            Err(Error::DuplicateName(_))
        ));

        let asys = base.autonomous_system(150).unwrap();
        assert_eq!(asys.nodes.len(), 3);
        assert_eq!(asys.networks.len(), 1);
        let router = &asys.nodes["router0"];
        assert!(router.is_bgp_router());
        assert_eq!(router.interfaces[0].address, Ipv4Addr::new(10, 150, 0, 254));
        assert_eq!(router.interfaces[1].address, Ipv4Addr::new(10, 100, 0, 150));
        assert_eq!(
            asys.nodes["host0"].interfaces[0].address,
            Ipv4Addr::new(10, 150, 0, 71)
        );
        assert_eq!(
            asys.nodes["host1"].interfaces[0].address,
            Ipv4Addr::new(10, 150, 0, 72)
        );
        assert!(!asys.nodes["host0"].is_bgp_router());
    }

    #[test]
    fn high_asn_needs_explicit_exchange_address() {
        let mut base = Base::new();
        base.create_internet_exchange(102).unwrap();
        let mut as11872 = base.create_autonomous_system(11872).unwrap();
        let err = as11872
            .create_router("r0")
            .unwrap()
            .join_network("ix102")
            .unwrap_err();
        assert!(matches!(
            err,
            Error::ExplicitAddressRequired { asn: 11872, .. }
        ));
        let rw = as11872
            .create_real_world_router("rw", PrefixSource::Static(vec![net("128.230.0.0/16")]))
            .unwrap()
            .join_network_at("ix102", Ipv4Addr::new(10, 102, 0, 118))
            .unwrap();
        assert_eq!(rw.key().to_string(), "as11872/rw");
        let node = base.node(&NodeKey::in_as(11872, "rw")).unwrap();
        assert_eq!(node.interfaces[0].address, Ipv4Addr::new(10, 102, 0, 118));
        assert!(node.is_bgp_router());
        assert!(matches!(
            as_err(base.create_autonomous_system(11872)),
            Error::DuplicateId(11872)
        ));
        assert!(matches!(
            base.create_autonomous_system(11872 + 1)
                .unwrap()
                .create_network("net0"),
            Err(Error::ExplicitPrefixRequired(_))
        ));
    }

    fn as_err<T: fmt::Debug>(r: Result<T>) -> Error {
        r.unwrap_err()
    }

    #[test]
    fn empty_static_prefix_source_is_rejected() {
        let mut base = Base::new();
        let mut asys = base.create_autonomous_system(11872).unwrap();
        assert!(matches!(
            asys.create_real_world_router("rw", PrefixSource::Static(vec![])),
            Err(Error::EmptyPrefixSource(_))
        ));
    }

    #[test]
    fn address_errors() {
        let mut base = Base::new();
        let mut asys = base.create_autonomous_system(150).unwrap();
        asys.create_network("net0").unwrap();
        asys.create_host("a")
            .unwrap()
            .join_network_at("net0", Ipv4Addr::new(10, 150, 0, 71))
            .unwrap();
        let err = asys
            .create_host("b")
            .unwrap()
            .join_network_at("net0", Ipv4Addr::new(10, 150, 0, 71))
            .unwrap_err();
        assert!(matches!(err, Error::AddressInUse(..)));
        let err = asys
            .host("b")
            .unwrap()
            .join_network_at("net0", Ipv4Addr::new(10, 151, 0, 5))
            .unwrap_err();
        assert!(matches!(err, Error::AddressOutOfPrefix(..)));
        let err = asys.host("b").unwrap().join_network("net9").unwrap_err();
        assert!(matches!(err, Error::UnknownNetwork(_)));
        // the pool skips the manually claimed .71
        asys.host("b").unwrap().join_network("net0").unwrap();
        let b = base.node(&NodeKey::in_as(150, "b")).unwrap();
        assert_eq!(b.interfaces[0].address, Ipv4Addr::new(10, 150, 0, 72));
    }

    #[test]
    fn remote_access_rules() {
        let mut base = Base::new();
        base.create_internet_exchange(100).unwrap();
        for asn in [152, 153] {
            base.create_autonomous_system(asn)
                .unwrap()
                .create_network("net0")
                .unwrap();
        }
        base.autonomous_system_mut(152)
            .unwrap()
            .network("net0")
            .unwrap()
            .enable_remote_access(RemoteAccessSpec::openvpn(1194))
            .unwrap();
        let err = base
            .autonomous_system_mut(153)
            .unwrap()
            .network("net0")
            .unwrap()
            .enable_remote_access(RemoteAccessSpec::openvpn(1194))
            .unwrap_err();
        assert!(matches!(err, Error::PortInUse(1194)));
        let err = base
            .exchange_network_mut(100)
            .unwrap()
            .enable_remote_access(RemoteAccessSpec::openvpn(1195))
            .unwrap_err();
        assert!(matches!(err, Error::IxNetworkNotAllowed(_)));
    }

    #[test]
    fn host_customization_is_recorded_verbatim() {
        let mut base = Base::new();
        let mut as151 = base.create_autonomous_system(151).unwrap();
        as151.create_network("net0").unwrap();
        as151
            .create_host("host0")
            .unwrap()
            .join_network("net0")
            .unwrap()
            .add_software("telnetd")
            .add_software("telnet")
            .import_file("/home/seed/ddos.py", "/tmp/ddos.py")
            .unwrap()
            .set_file("/tmp/file.txt", "some content")
            .unwrap()
            .add_build_command("useradd -m -s /bin/bash seed")
            .append_start_command("cd /bof && /bof/server &");
        let err = as151
            .host("host0")
            .unwrap()
            .set_file("tmp/x", "")
            .unwrap_err();
        assert!(matches!(err, Error::RelativePath(_)));
        let host = base.node(&NodeKey::in_as(151, "host0")).unwrap();
        assert_eq!(host.software.len(), 2);
        assert_eq!(host.files.len(), 2);
        assert_eq!(host.start_commands, vec!["cd /bof && /bof/server &"]);
    }

    #[test]
    fn node_key_round_trips_through_text() {
        let key: NodeKey = "as150/host0".parse().unwrap();
        assert_eq!(key, NodeKey::in_as(150, "host0"));
        let key: NodeKey = "ix100/ix100".parse().unwrap();
        assert_eq!(key.scope, Scope::Ix(100));
        assert!("host0".parse::<NodeKey>().is_err());
    }

    #[test]
    fn detached_node_fails_finalize() {
        let mut base = Base::new();
        base.create_autonomous_system(150)
            .unwrap()
            .create_host("lonely")
            .unwrap();
        assert!(matches!(base.finalize(), Err(Error::DetachedNode(_))));
    }
}
