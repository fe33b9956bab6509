//! Routing layers and router configuration.
//!
//! The [`Routing`] layer turns on OSPF inside every AS and a full IBGP mesh
//! between its routers. The [`Ebgp`] layer records inter-AS sessions, either
//! private (with a [`PeerRelationship`]) or through an exchange route server.
//!
//! Relationships are enforced with BGP large communities of the form
//! `(local ASN, 1, class)`. Every route is tagged on import with the class of
//! the neighbor it came from; export filters then only look at that tag.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::base::{Base, NodeKey, Role, Scope, LOOPBACK_BLOCK};
use crate::emulator::RenderedEmulation;
use crate::{Asn, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerRelationship {
    /// Left side is the provider, right side the customer.
    Provider,
    Peer,
    Unfiltered,
}

impl std::str::FromStr for PeerRelationship {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "provider" => Ok(PeerRelationship::Provider),
            "peer" => Ok(PeerRelationship::Peer),
            "unfiltered" => Ok(PeerRelationship::Unfiltered),
            other => Err(format!("unknown relationship `{other}`")),
        }
    }
}

/// Where a route was learned from. Doubles as the `data2` value of the
/// relationship community.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteClass {
    Own,
    Customer,
    Peer,
    Provider,
    Unfiltered,
}

impl RouteClass {
    pub fn community_value(self) -> u32 {
        match self {
            RouteClass::Own => 0,
            RouteClass::Customer => 1,
            RouteClass::Peer => 2,
            RouteClass::Provider => 3,
            RouteClass::Unfiltered => 4,
        }
    }

    /// Local preference: customer 30, peer 20, provider and unfiltered 10.
    /// Own routes always win.
    pub fn preference(self) -> u32 {
        match self {
            RouteClass::Own => 40,
            RouteClass::Customer => 30,
            RouteClass::Peer => 20,
            RouteClass::Provider | RouteClass::Unfiltered => 10,
        }
    }

    /// Whether a route of this class may be sent to a neighbor whose class
    /// (from the sender's point of view) is `to`.
    pub fn exportable_to(self, to: RouteClass) -> bool {
        match to {
            RouteClass::Customer | RouteClass::Unfiltered => true,
            RouteClass::Peer | RouteClass::Provider => {
                matches!(self, RouteClass::Own | RouteClass::Customer)
            }
            RouteClass::Own => false,
        }
    }

    fn session_prefix(self) -> &'static str {
        match self {
            RouteClass::Own => "o",
            RouteClass::Customer => "c",
            RouteClass::Peer => "p",
            RouteClass::Provider => "u",
            RouteClass::Unfiltered => "x",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LargeCommunity {
    pub global_admin: Asn,
    pub data1: u32,
    pub data2: u32,
}

impl LargeCommunity {
    pub fn relationship(asn: Asn, class: RouteClass) -> Self {
        LargeCommunity {
            global_admin: asn,
            data1: 1,
            data2: class.community_value(),
        }
    }
}

impl std::fmt::Display for LargeCommunity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.global_admin, self.data1, self.data2)
    }
}

/// The routing layer. It has no settings of its own: its presence turns on
/// OSPF and IBGP for every AS.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routing {}

impl Routing {
    pub fn new() -> Self {
        Routing {}
    }
}

/// One private peering between two ASes at an exchange.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeeringSpec {
    pub ix: u32,
    pub left: Asn,
    pub right: Asn,
    pub relationship: PeerRelationship,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsMembership {
    pub ix: u32,
    pub asn: Asn,
}

/// The EBGP layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ebgp {
    private: Vec<PeeringSpec>,
    route_servers: BTreeMap<u32, Vec<Asn>>,
}

impl Ebgp {
    pub fn new() -> Self {
        Ebgp::default()
    }

    fn is_rs_member(&self, ix: u32, asn: Asn) -> bool {
        self.route_servers
            .get(&ix)
            .is_some_and(|members| members.contains(&asn))
    }

    fn has_private(&self, ix: u32, a: Asn, b: Asn) -> bool {
        self.private
            .iter()
            .any(|p| p.ix == ix && ((p.left == a && p.right == b) || (p.left == b && p.right == a)))
    }

    /// One session per (left, right) pair.
    pub fn add_private_peerings(
        &mut self,
        ix: u32,
        left: &[Asn],
        right: &[Asn],
        relationship: PeerRelationship,
    ) -> Result<Vec<PeeringSpec>> {
        let mut added = Vec::new();
        for &l in left {
            for &r in right {
                let dup = l == r
                    || self.has_private(ix, l, r)
                    || added.iter().any(|p: &PeeringSpec| {
                        (p.left == l && p.right == r) || (p.left == r && p.right == l)
                    })
                    || (self.is_rs_member(ix, l) && self.is_rs_member(ix, r));
                if dup {
                    return Err(Error::DuplicateSession(l, r, ix));
                }
                added.push(PeeringSpec {
                    ix,
                    left: l,
                    right: r,
                    relationship,
                });
            }
        }
        self.private.extend(added.iter().cloned());
        Ok(added)
    }

    pub fn add_private_peering(
        &mut self,
        ix: u32,
        left: Asn,
        right: Asn,
        relationship: PeerRelationship,
    ) -> Result<PeeringSpec> {
        let mut added = self.add_private_peerings(ix, &[left], &[right], relationship)?;
        Ok(added.remove(0))
    }

    /// Peers every AS in `asns` with the route server of exchange `ix`.
    pub fn add_rs_peers(&mut self, ix: u32, asns: &[Asn]) -> Result<Vec<RsMembership>> {
        let mut added: Vec<Asn> = Vec::new();
        for &asn in asns {
            let clash = self.is_rs_member(ix, asn)
                || added.contains(&asn)
                || self.private.iter().any(|p| {
                    p.ix == ix
                        && ((p.left == asn
                            && (self.is_rs_member(ix, p.right) || added.contains(&p.right)))
                            || (p.right == asn
                                && (self.is_rs_member(ix, p.left) || added.contains(&p.left))))
                });
            if clash {
                return Err(Error::DuplicateSession(asn, ix, ix));
            }
            added.push(asn);
        }
        self.route_servers
            .entry(ix)
            .or_default()
            .extend(added.iter().copied());
        Ok(added
            .into_iter()
            .map(|asn| RsMembership { ix, asn })
            .collect())
    }

    pub fn private_peerings(&self) -> &[PeeringSpec] {
        &self.private
    }

    pub fn route_servers(&self) -> &BTreeMap<u32, Vec<Asn>> {
        &self.route_servers
    }

    /// Creates route servers and resolves every peering to concrete routers.
    pub(crate) fn configure(&self, base: &mut Base) -> Result<Vec<EbgpSession>> {
        let mut sessions = Vec::new();
        for p in &self.private {
            let a = exchange_endpoint(base, p.left, p.ix)?;
            let b = exchange_endpoint(base, p.right, p.ix)?;
            sessions.push(EbgpSession {
                ix: p.ix,
                kind: SessionKind::Private(p.relationship),
                a,
                b,
            });
        }
        for (&ix, members) in &self.route_servers {
            if base.internet_exchange(ix).is_none() {
                let asn = members.first().copied().unwrap_or(ix);
                return Err(Error::NotAtExchange { asn, ix });
            }
            // resolve members first so a bad member fails before we mutate
            let ends = members
                .iter()
                .map(|&asn| exchange_endpoint(base, asn, ix))
                .collect::<Result<Vec<_>>>()?;
            let rs_key = base.ensure_route_server(ix)?;
            let rs_addr = base
                .node(&rs_key)
                .and_then(|n| n.first_address())
                .expect("route server joined its exchange");
            for b in ends {
                sessions.push(EbgpSession {
                    ix,
                    kind: SessionKind::RouteServer,
                    a: Endpoint {
                        node: rs_key.clone(),
                        asn: ix,
                        address: rs_addr,
                    },
                    b,
                });
            }
        }
        Ok(sessions)
    }
}

fn exchange_endpoint(base: &Base, asn: Asn, ix: u32) -> Result<Endpoint> {
    let network = format!("ix{ix}");
    let asys = base
        .autonomous_system(asn)
        .ok_or(Error::NotAtExchange { asn, ix })?;
    asys.routers()
        .find_map(|r| {
            r.interface_on(&network).map(|i| Endpoint {
                node: r.key(),
                asn,
                address: i.address,
            })
        })
        .ok_or(Error::NotAtExchange { asn, ix })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    /// `a` is the left side of the peering.
    Private(PeerRelationship),
    /// `a` is the route server, `b` the participant.
    RouteServer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub node: NodeKey,
    pub asn: Asn,
    pub address: Ipv4Addr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EbgpSession {
    pub ix: u32,
    pub kind: SessionKind,
    pub a: Endpoint,
    pub b: Endpoint,
}

impl EbgpSession {
    /// The class of the far end as seen from `local`, or `None` when `local`
    /// is not on this session. Route-server participants see each other as
    /// peers; the route server itself does not classify.
    pub fn neighbor_class(&self, local: &NodeKey) -> Option<RouteClass> {
        let is_a = self.a.node == *local;
        if !is_a && self.b.node != *local {
            return None;
        }
        Some(match self.kind {
            SessionKind::RouteServer => RouteClass::Peer,
            SessionKind::Private(PeerRelationship::Peer) => RouteClass::Peer,
            SessionKind::Private(PeerRelationship::Unfiltered) => RouteClass::Unfiltered,
            SessionKind::Private(PeerRelationship::Provider) if is_a => RouteClass::Customer,
            SessionKind::Private(PeerRelationship::Provider) => RouteClass::Provider,
        })
    }

    pub fn far_end(&self, local: &NodeKey) -> Option<&Endpoint> {
        if self.a.node == *local {
            Some(&self.b)
        } else if self.b.node == *local {
            Some(&self.a)
        } else {
            None
        }
    }

    pub fn near_end(&self, local: &NodeKey) -> Option<&Endpoint> {
        if self.a.node == *local {
            Some(&self.a)
        } else if self.b.node == *local {
            Some(&self.b)
        } else {
            None
        }
    }
}

/// Full IBGP mesh of one AS.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IbgpMesh {
    pub asn: Asn,
    /// Unordered router pairs, each listed once.
    pub session_pairs: Vec<(String, String)>,
}

/// Everything the routing layer decides at render time.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingPlan {
    pub ospf: bool,
    pub ibgp: BTreeMap<Asn, IbgpMesh>,
}

/// Builds the mesh over every router of the AS.
pub fn build_ibgp_mesh(base: &Base, asn: Asn) -> Result<IbgpMesh> {
    let asys = base.autonomous_system(asn).ok_or(Error::UnknownAs(asn))?;
    let routers: Vec<&str> = asys.routers().map(|r| r.name.as_str()).collect();
    let mut session_pairs = Vec::new();
    for (i, a) in routers.iter().enumerate() {
        for b in &routers[i + 1..] {
            session_pairs.push((a.to_string(), b.to_string()));
        }
    }
    Ok(IbgpMesh { asn, session_pairs })
}

pub(crate) fn plan_routing(base: &Base) -> Result<RoutingPlan> {
    let mut ibgp = BTreeMap::new();
    for asys in base.autonomous_systems() {
        ibgp.insert(asys.asn, build_ibgp_mesh(base, asys.asn)?);
    }
    Ok(RoutingPlan { ospf: true, ibgp })
}

/// Loopback addresses for every router, in node order.
pub(crate) fn assign_loopbacks(base: &Base) -> Result<BTreeMap<NodeKey, Ipv4Addr>> {
    let mut out = BTreeMap::new();
    let first = u32::from(LOOPBACK_BLOCK.network());
    let capacity = (1u32 << (32 - LOOPBACK_BLOCK.prefix_len())) - 2;
    for (i, node) in base.nodes().filter(|n| n.role.is_router()).enumerate() {
        let index = i as u32 + 1;
        if index > capacity {
            return Err(Error::AddressPoolExhausted("loopback block".into()));
        }
        out.insert(node.key(), Ipv4Addr::from(first + index));
    }
    Ok(out)
}

/// Emits BIRD 2 configuration for a router or route server. Hosts get
/// `None`.
pub fn emit_router_config(rendered: &RenderedEmulation, key: &NodeKey) -> Result<Option<String>> {
    let base = rendered.base();
    let node = base
        .node(key)
        .ok_or_else(|| Error::UnknownNode(key.to_string()))?;
    match node.role {
        Role::Host => Ok(None),
        Role::RouteServer => Ok(Some(route_server_config(rendered, key))),
        Role::Router | Role::RealWorldRouter => Ok(Some(router_config(rendered, key)?)),
    }
}

fn route_server_config(rendered: &RenderedEmulation, key: &NodeKey) -> String {
    let node = rendered.base().node(key).expect("caller checked");
    let mut out = String::new();
    let router_id = node.first_address().expect("route server is attached");
    let _ = writeln!(out, "# {key} route server");
    let _ = writeln!(out, "router id {router_id};");
    out.push('\n');
    out.push_str("protocol device {\n    scan time 10;\n}\n");
    for session in rendered.sessions() {
        let Some(far) = session.far_end(key) else {
            continue;
        };
        let near = session.near_end(key).expect("on session");
        out.push('\n');
        let _ = writeln!(out, "protocol bgp rs_as{} {{", far.asn);
        out.push_str("    ipv4 {\n        import all;\n        export all;\n    };\n");
        out.push_str("    rs client;\n");
        let _ = writeln!(out, "    local {} as {};", near.address, near.asn);
        let _ = writeln!(out, "    neighbor {} as {};", far.address, far.asn);
        out.push_str("}\n");
    }
    out
}

fn router_config(rendered: &RenderedEmulation, key: &NodeKey) -> Result<String> {
    let base = rendered.base();
    let node = base.node(key).expect("caller checked");
    let Scope::As(asn) = key.scope else {
        unreachable!("routers live in an AS")
    };
    let loopback = rendered
        .loopback(key)
        .ok_or_else(|| Error::UnknownNode(key.to_string()))?;
    let plan = rendered.routing_plan();
    let internal: Vec<&str> = node
        .interfaces
        .iter()
        .filter(|i| !crate::base::is_exchange_name(&i.network))
        .map(|i| i.network.as_str())
        .collect();
    let exchanges: Vec<&str> = node
        .interfaces
        .iter()
        .filter(|i| crate::base::is_exchange_name(&i.network))
        .map(|i| i.network.as_str())
        .collect();
    let sessions: Vec<_> = rendered
        .sessions()
        .iter()
        .filter(|s| s.near_end(key).is_some())
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "# {key}");
    let _ = writeln!(out, "router id {loopback};");
    let _ = writeln!(out, "define LOCAL_ASN = {asn};");
    out.push('\n');
    out.push_str("ipv4 table t_bgp;\nipv4 table t_ospf;\n\n");
    out.push_str("protocol device {\n    scan time 10;\n}\n\n");
    out.push_str(
        "protocol kernel {\n    ipv4 {\n        import none;\n        export where dest != RTD_BLACKHOLE;\n    };\n    learn;\n    merge paths on;\n}\n\n",
    );

    let mut direct = vec!["\"dummy0\"".to_string()];
    direct.extend(internal.iter().map(|n| format!("\"{n}\"")));
    out.push_str("protocol direct local_nets {\n    ipv4 {\n        table t_ospf;\n        import all;\n    };\n");
    let _ = writeln!(out, "    interface {};", direct.join(", "));
    out.push_str("}\n\n");

    if plan.is_some_and(|p| p.ospf) {
        out.push_str("protocol ospf v2 ospf1 {\n    ipv4 {\n        table t_ospf;\n        import all;\n        export all;\n    };\n    area 0 {\n");
        out.push_str("        interface \"dummy0\" { stub; };\n");
        for net in &internal {
            let _ = writeln!(
                out,
                "        interface \"{net}\" {{ hello 1; dead count 2; }};"
            );
        }
        for net in &exchanges {
            let _ = writeln!(out, "        interface \"{net}\" {{ stub; }};");
        }
        out.push_str("    };\n}\n\n");
    }
    out.push_str("protocol pipe ospf_to_master {\n    table t_ospf;\n    peer table master4;\n    import none;\n    export all;\n}\n\n");

    let mut announced: Vec<Ipv4Net> = Vec::new();
    if node.is_bgp_router() {
        let asys = base.autonomous_system(asn).expect("router's AS exists");
        announced.extend(asys.networks.values().map(|n| n.prefix));
        announced.extend(node.announced.iter().copied());
    }
    if !announced.is_empty() {
        out.push_str("protocol static own_nets {\n    ipv4 {\n        table t_bgp;\n        preference 10;\n        import filter {\n");
        let _ = writeln!(
            out,
            "            bgp_large_community.add((LOCAL_ASN, 1, {}));",
            RouteClass::Own.community_value()
        );
        let _ = writeln!(
            out,
            "            bgp_local_pref = {};",
            RouteClass::Own.preference()
        );
        out.push_str("            accept;\n        };\n    };\n");
        for prefix in &announced {
            let _ = writeln!(out, "    route {prefix} blackhole;");
        }
        out.push_str("}\n\n");
    }

    if !sessions.is_empty() {
        out.push_str("filter export_up {\n");
        for class in [RouteClass::Own, RouteClass::Customer] {
            let _ = writeln!(
                out,
                "    if ((LOCAL_ASN, 1, {}) ~ bgp_large_community) then accept;",
                class.community_value()
            );
        }
        out.push_str("    reject;\n}\n\n");
    }
    out.push_str("protocol pipe bgp_to_master {\n    table t_bgp;\n    peer table master4;\n    import none;\n    export all;\n}\n");

    if let Some(mesh) = plan.and_then(|p| p.ibgp.get(&asn)) {
        for (a, b) in &mesh.session_pairs {
            let other = if *a == key.name {
                b
            } else if *b == key.name {
                a
            } else {
                continue;
            };
            let peer_lo = rendered
                .loopback(&NodeKey::in_as(asn, other.clone()))
                .expect("every router has a loopback");
            out.push('\n');
            let _ = writeln!(
                out,
                "protocol bgp ibgp_{} {{",
                other.replace(['-', '.'], "_")
            );
            out.push_str("    ipv4 {\n        table t_bgp;\n        import all;\n        export all;\n        next hop self;\n        igp table t_ospf;\n    };\n");
            let _ = writeln!(out, "    local {loopback} as LOCAL_ASN;");
            let _ = writeln!(out, "    neighbor {peer_lo} as LOCAL_ASN;");
            out.push_str("}\n");
        }
    }

    for session in sessions {
        let class = session.neighbor_class(key).expect("on session");
        let near = session.near_end(key).expect("on session");
        let far = session.far_end(key).expect("on session");
        out.push('\n');
        match session.kind {
            SessionKind::RouteServer => {
                let _ = writeln!(out, "protocol bgp rs_ix{} {{", session.ix);
            }
            SessionKind::Private(_) => {
                let _ = writeln!(
                    out,
                    "protocol bgp {}_as{}_ix{} {{",
                    class.session_prefix(),
                    far.asn,
                    session.ix
                );
            }
        }
        out.push_str("    ipv4 {\n        table t_bgp;\n        import filter {\n");
        let _ = writeln!(
            out,
            "            bgp_large_community.add((LOCAL_ASN, 1, {}));",
            class.community_value()
        );
        let _ = writeln!(out, "            bgp_local_pref = {};", class.preference());
        out.push_str("            accept;\n        };\n");
        match class {
            RouteClass::Peer | RouteClass::Provider => {
                out.push_str("        export filter export_up;\n")
            }
            _ => out.push_str("        export all;\n"),
        }
        out.push_str("        next hop self;\n    };\n");
        let _ = writeln!(out, "    local {} as LOCAL_ASN;", near.address);
        let _ = writeln!(out, "    neighbor {} as {};", far.address, far.asn);
        out.push_str("}\n");
    }
    Ok(out)
}

/// ASNs with at least one router, used for summaries.
pub fn routed_ases(base: &Base) -> BTreeSet<Asn> {
    base.autonomous_systems()
        .filter(|a| a.routers().next().is_some())
        .map(|a| a.asn)
        .collect()
}
