//! Static control-plane analysis: the AS-level BGP fixed point implied by
//! the emitted policies, forwarding traces and what-if announcements.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::base::{NodeKey, Role, Scope};
use crate::emulator::RenderedEmulation;
use crate::routing::{PeerRelationship, RouteClass, SessionKind};
use crate::{Asn, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RibEntry {
    pub prefix: Ipv4Net,
    /// Neighbor first, origin last. Empty for own prefixes.
    pub as_path: Vec<Asn>,
    pub learned_from: RouteClass,
    pub pref: u32,
}

impl RibEntry {
    pub fn next_hop_as(&self) -> Option<Asn> {
        self.as_path.first().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct ModelNode {
    key: NodeKey,
    role: Role,
    addresses: Vec<Ipv4Addr>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct ModelAs {
    nodes: Vec<ModelNode>,
    /// Intra-AS adjacency through shared internal networks.
    adjacency: BTreeMap<NodeKey, BTreeSet<NodeKey>>,
}

/// One EBGP adjacency between border routers of two ASes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Link {
    a: (Asn, NodeKey),
    b: (Asn, NodeKey),
    /// Class of `b` as seen from `a`.
    class_at_a: RouteClass,
    class_at_b: RouteClass,
}

/// AS graph, intra-AS graphs and originations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPlaneModel {
    ases: BTreeMap<Asn, ModelAs>,
    links: Vec<Link>,
    originations: BTreeMap<Ipv4Net, BTreeSet<Asn>>,
}

fn relationship_classes(rel: PeerRelationship) -> (RouteClass, RouteClass) {
    match rel {
        PeerRelationship::Provider => (RouteClass::Customer, RouteClass::Provider),
        PeerRelationship::Peer => (RouteClass::Peer, RouteClass::Peer),
        PeerRelationship::Unfiltered => (RouteClass::Unfiltered, RouteClass::Unfiltered),
    }
}

impl ControlPlaneModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an AS represented by a single router `r0`.
    pub fn add_as(&mut self, asn: Asn) {
        let key = NodeKey::in_as(asn, "r0");
        let entry = self.ases.entry(asn).or_default();
        if entry.nodes.is_empty() {
            entry.nodes.push(ModelNode {
                key: key.clone(),
                role: Role::Router,
                addresses: Vec::new(),
            });
            entry.adjacency.insert(key, BTreeSet::new());
        }
    }

    /// Links `left` and `right`; with `Provider`, `left` is the provider.
    pub fn add_link(&mut self, left: Asn, right: Asn, rel: PeerRelationship) -> Result<()> {
        let a = self.border_of(left)?;
        let b = self.border_of(right)?;
        let (class_at_a, class_at_b) = relationship_classes(rel);
        self.links.push(Link {
            a: (left, a),
            b: (right, b),
            class_at_a,
            class_at_b,
        });
        Ok(())
    }

    fn border_of(&self, asn: Asn) -> Result<NodeKey> {
        self.ases
            .get(&asn)
            .and_then(|a| a.nodes.iter().find(|n| n.role.is_router()))
            .map(|n| n.key.clone())
            .ok_or(Error::UnknownAs(asn))
    }

    pub fn originate(&mut self, asn: Asn, prefix: Ipv4Net) -> Result<()> {
        if !self.ases.contains_key(&asn) {
            return Err(Error::UnknownAs(asn));
        }
        let prefix = prefix.trunc();
        if let Some(ModelAs { nodes, .. }) = self.ases.get_mut(&asn) {
            if let Some(n) = nodes.iter_mut().find(|n| n.role.is_router()) {
                if n.addresses.iter().all(|a| !prefix.contains(a)) {
                    n.addresses
                        .push(Ipv4Addr::from(u32::from(prefix.network()) + 1));
                }
            }
        }
        self.originations.entry(prefix).or_default().insert(asn);
        Ok(())
    }

    /// Builds the model mirrored by the configs of a rendered emulation.
    pub fn from_rendered(rendered: &RenderedEmulation) -> Self {
        let base = rendered.base();
        let mut model = ControlPlaneModel::default();
        for asys in base.autonomous_systems() {
            let mut m = ModelAs::default();
            let mut by_net: BTreeMap<&str, Vec<NodeKey>> = BTreeMap::new();
            for node in asys.nodes.values() {
                let key = node.key();
                for iface in &node.interfaces {
                    if !crate::base::is_exchange_name(&iface.network) {
                        by_net.entry(&iface.network).or_default().push(key.clone());
                    }
                }
                m.adjacency.insert(key.clone(), BTreeSet::new());
                m.nodes.push(ModelNode {
                    key,
                    role: node.role,
                    addresses: node.interfaces.iter().map(|i| i.address).collect(),
                });
            }
            for members in by_net.values() {
                for x in members {
                    for y in members {
                        if x != y {
                            m.adjacency.get_mut(x).expect("inserted").insert(y.clone());
                        }
                    }
                }
            }
            let routed = asys.nodes.values().any(|n| n.is_bgp_router());
            if routed {
                for net in asys.networks.values() {
                    model
                        .originations
                        .entry(net.prefix)
                        .or_default()
                        .insert(asys.asn);
                }
                for node in asys.nodes.values() {
                    for p in &node.announced {
                        model.originations.entry(*p).or_default().insert(asys.asn);
                    }
                }
            }
            model.ases.insert(asys.asn, m);
        }

        let mut rs_members: BTreeMap<u32, Vec<(Asn, NodeKey)>> = BTreeMap::new();
        for s in rendered.sessions() {
            match s.kind {
                SessionKind::Private(rel) => {
                    let (class_at_a, class_at_b) = relationship_classes(rel);
                    model.links.push(Link {
                        a: (s.a.asn, s.a.node.clone()),
                        b: (s.b.asn, s.b.node.clone()),
                        class_at_a,
                        class_at_b,
                    });
                }
                SessionKind::RouteServer => {
                    for end in [&s.a, &s.b] {
                        if matches!(end.node.scope, Scope::As(_)) {
                            rs_members
                                .entry(s.ix)
                                .or_default()
                                .push((end.asn, end.node.clone()));
                        }
                    }
                }
            }
        }
        for members in rs_members.values() {
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    if a.0 != b.0 {
                        model.links.push(Link {
                            a: a.clone(),
                            b: b.clone(),
                            class_at_a: RouteClass::Peer,
                            class_at_b: RouteClass::Peer,
                        });
                    }
                }
            }
        }
        model
    }

    pub fn ases(&self) -> impl Iterator<Item = Asn> + '_ {
        self.ases.keys().copied()
    }

    pub fn prefixes(&self) -> impl Iterator<Item = &Ipv4Net> {
        self.originations.keys()
    }

    pub fn origins(&self, prefix: &Ipv4Net) -> Option<&BTreeSet<Asn>> {
        self.originations.get(prefix)
    }

    /// Neighbor ASN -> class of that neighbor, for one AS. The first link
    /// between two ASes decides the class.
    pub fn neighbors(&self, asn: Asn) -> BTreeMap<Asn, RouteClass> {
        let mut out = BTreeMap::new();
        for l in &self.links {
            if l.a.0 == asn && l.b.0 != asn {
                out.entry(l.b.0).or_insert(l.class_at_a);
            } else if l.b.0 == asn && l.a.0 != asn {
                out.entry(l.a.0).or_insert(l.class_at_b);
            }
        }
        out
    }

    pub fn routers_of(&self, asn: Asn) -> Vec<NodeKey> {
        self.ases
            .get(&asn)
            .map(|a| {
                a.nodes
                    .iter()
                    .filter(|n| n.role.is_router())
                    .map(|n| n.key.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Adds an origination of `prefix` by `asn`.
    pub fn announce(&mut self, asn: Asn, prefix: Ipv4Net) -> Result<()> {
        if !self.ases.contains_key(&asn) {
            return Err(Error::UnknownAs(asn));
        }
        self.originations
            .entry(prefix.trunc())
            .or_default()
            .insert(asn);
        Ok(())
    }

    /// Removes an origination added by [`announce`](Self::announce).
    pub fn withdraw(&mut self, asn: Asn, prefix: Ipv4Net) -> Result<()> {
        if !self.ases.contains_key(&asn) {
            return Err(Error::UnknownAs(asn));
        }
        let prefix = prefix.trunc();
        if let Some(set) = self.originations.get_mut(&prefix) {
            set.remove(&asn);
            if set.is_empty() {
                self.originations.remove(&prefix);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ribs {
    /// AS-level selection, shared by every router of the AS.
    pub per_as: BTreeMap<Asn, BTreeMap<Ipv4Net, RibEntry>>,
    pub per_router: BTreeMap<NodeKey, Vec<RibEntry>>,
    /// Synchronous rounds that changed some selection, summed over prefixes.
    pub iterations: usize,
}

impl Ribs {
    pub fn lookup(&self, asn: Asn, addr: Ipv4Addr) -> Option<&RibEntry> {
        self.per_as
            .get(&asn)?
            .iter()
            .filter(|(p, _)| p.contains(&addr))
            .max_by_key(|(p, _)| p.prefix_len())
            .map(|(_, e)| e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Candidate {
    path: Vec<Asn>,
    class: RouteClass,
}

fn rank(c: &Candidate) -> (std::cmp::Reverse<u32>, usize, Asn) {
    (
        std::cmp::Reverse(c.class.preference()),
        c.path.len(),
        c.path.first().copied().unwrap_or(0),
    )
}

/// Fixed point of selective export, one prefix at a time, in synchronous
/// rounds.
pub fn compute_ribs(model: &ControlPlaneModel) -> Ribs {
    let asns: Vec<Asn> = model.ases.keys().copied().collect();
    let neighbors: BTreeMap<Asn, BTreeMap<Asn, RouteClass>> =
        asns.iter().map(|&a| (a, model.neighbors(a))).collect();
    let mut ribs = Ribs::default();
    for asn in &asns {
        ribs.per_as.insert(*asn, BTreeMap::new());
    }

    for (prefix, origins) in &model.originations {
        let mut best: BTreeMap<Asn, Candidate> = BTreeMap::new();
        loop {
            let mut next = BTreeMap::new();
            for &asn in &asns {
                if origins.contains(&asn) {
                    next.insert(
                        asn,
                        Candidate {
                            path: Vec::new(),
                            class: RouteClass::Own,
                        },
                    );
                    continue;
                }
                let mut choice: Option<Candidate> = None;
                for (&n, &class) in &neighbors[&asn] {
                    let Some(route) = best.get(&n) else { continue };
                    let me_at_n = neighbors[&n][&asn];
                    if !route.class.exportable_to(me_at_n) || route.path.contains(&asn) {
                        continue;
                    }
                    let mut path = Vec::with_capacity(route.path.len() + 1);
                    path.push(n);
                    path.extend_from_slice(&route.path);
                    let cand = Candidate { path, class };
                    if choice.as_ref().is_none_or(|c| rank(&cand) < rank(c)) {
                        choice = Some(cand);
                    }
                }
                if let Some(c) = choice {
                    next.insert(asn, c);
                }
            }
            if next == best {
                break;
            }
            best = next;
            ribs.iterations += 1;
        }
        for (asn, c) in best {
            ribs.per_as.get_mut(&asn).expect("known AS").insert(
                *prefix,
                RibEntry {
                    prefix: *prefix,
                    as_path: c.path,
                    learned_from: c.class,
                    pref: c.class.preference(),
                },
            );
        }
    }

    for (asn, m) in &model.ases {
        let entries: Vec<RibEntry> = ribs.per_as[asn].values().cloned().collect();
        for node in m.nodes.iter().filter(|n| n.role.is_router()) {
            ribs.per_router.insert(node.key.clone(), entries.clone());
        }
    }
    ribs
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Trace {
    Reached {
        hops: Vec<NodeKey>,
        as_path: Vec<Asn>,
        /// False when the final AS originates the prefix but no node holds
        /// the address.
        delivered: bool,
    },
    Unreachable {
        hops: Vec<NodeKey>,
    },
}

impl Trace {
    pub fn hops(&self) -> &[NodeKey] {
        match self {
            Trace::Reached { hops, .. } | Trace::Unreachable { hops } => hops,
        }
    }

    pub fn is_reachable(&self) -> bool {
        matches!(self, Trace::Reached { .. })
    }

    pub fn final_as(&self) -> Option<Asn> {
        match self {
            Trace::Reached { as_path, .. } => as_path.last().copied(),
            Trace::Unreachable { .. } => None,
        }
    }
}

impl ControlPlaneModel {
    fn node_as(&self, key: &NodeKey) -> Option<Asn> {
        match key.scope {
            Scope::As(asn) => self
                .ases
                .get(&asn)
                .filter(|m| m.nodes.iter().any(|n| n.key == *key))
                .map(|_| asn),
            Scope::Ix(_) => None,
        }
    }

    /// Shortest intra-AS path; only routers relay.
    fn intra_path(&self, asn: Asn, from: &NodeKey, to: &NodeKey) -> Option<Vec<NodeKey>> {
        if from == to {
            return Some(vec![from.clone()]);
        }
        let m = self.ases.get(&asn)?;
        let is_router: BTreeSet<&NodeKey> = m
            .nodes
            .iter()
            .filter(|n| n.role.is_router())
            .map(|n| &n.key)
            .collect();
        let mut prev: BTreeMap<&NodeKey, &NodeKey> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(cur) = queue.pop_front() {
            if cur != from && !is_router.contains(cur) {
                continue;
            }
            for next in m.adjacency.get(cur).into_iter().flatten() {
                if !seen.insert(next) {
                    continue;
                }
                prev.insert(next, cur);
                if next == to {
                    let mut path = vec![to.clone()];
                    let mut at = to;
                    while let Some(p) = prev.get(at) {
                        path.push((*p).clone());
                        at = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(next);
            }
        }
        None
    }

    fn holder_of(&self, asn: Asn, addr: Ipv4Addr) -> Option<&NodeKey> {
        self.ases
            .get(&asn)?
            .nodes
            .iter()
            .find(|n| n.addresses.contains(&addr))
            .map(|n| &n.key)
    }

    /// Border-router pairs linking `from` to `to`.
    fn crossings(&self, from: Asn, to: Asn) -> Vec<(NodeKey, NodeKey)> {
        self.links
            .iter()
            .filter_map(|l| {
                if l.a.0 == from && l.b.0 == to {
                    Some((l.a.1.clone(), l.b.1.clone()))
                } else if l.b.0 == from && l.a.0 == to {
                    Some((l.b.1.clone(), l.a.1.clone()))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Hop-by-hop forwarding from `src` toward `dst`.
    pub fn trace_path(&self, ribs: &Ribs, src: &NodeKey, dst: Ipv4Addr) -> Result<Trace> {
        let mut asn = self
            .node_as(src)
            .ok_or_else(|| Error::UnknownNode(src.to_string()))?;
        let mut at = src.clone();
        let mut hops = vec![src.clone()];
        let mut as_path = vec![asn];
        loop {
            let Some(entry) = ribs.lookup(asn, dst) else {
                return Ok(Trace::Unreachable { hops });
            };
            match entry.next_hop_as() {
                None => {
                    let Some(target) = self.holder_of(asn, dst) else {
                        return Ok(Trace::Reached {
                            hops,
                            as_path,
                            delivered: false,
                        });
                    };
                    let Some(path) = self.intra_path(asn, &at, target) else {
                        return Ok(Trace::Unreachable { hops });
                    };
                    hops.extend(path.into_iter().skip(1));
                    return Ok(Trace::Reached {
                        hops,
                        as_path,
                        delivered: true,
                    });
                }
                Some(next) => {
                    if as_path.contains(&next) {
                        return Ok(Trace::Unreachable { hops });
                    }
                    let best = self
                        .crossings(asn, next)
                        .into_iter()
                        .filter_map(|(near, far)| {
                            self.intra_path(asn, &at, &near).map(|p| (p, far))
                        })
                        .min_by_key(|(p, _)| p.len());
                    let Some((path, far)) = best else {
                        return Ok(Trace::Unreachable { hops });
                    };
                    hops.extend(path.into_iter().skip(1));
                    hops.push(far.clone());
                    at = far;
                    asn = next;
                    as_path.push(next);
                }
            }
        }
    }

    /// The node traces start from for an AS: its first host, else its first
    /// router.
    pub fn representative(&self, asn: Asn) -> Option<NodeKey> {
        let m = self.ases.get(&asn)?;
        m.nodes
            .iter()
            .find(|n| n.role == Role::Host)
            .or_else(|| m.nodes.iter().find(|n| n.role.is_router()))
            .map(|n| n.key.clone())
    }

    /// Lowest assigned address inside `prefix`, else the first address.
    pub fn probe_address(&self, prefix: Ipv4Net) -> Ipv4Addr {
        self.ases
            .values()
            .flat_map(|m| m.nodes.iter().flat_map(|n| n.addresses.iter()))
            .filter(|a| prefix.contains(*a))
            .min()
            .copied()
            .unwrap_or_else(|| Ipv4Addr::from(u32::from(prefix.network()).saturating_add(1)))
    }

    /// Traces from the representative of every AS except `skip`.
    pub fn trace_all(&self, ribs: &Ribs, dst: Ipv4Addr, skip: Option<Asn>) -> BTreeMap<Asn, Trace> {
        let mut out = BTreeMap::new();
        for &asn in self.ases.keys() {
            if Some(asn) == skip {
                continue;
            }
            if let Some(src) = self.representative(asn) {
                let trace = self
                    .trace_path(ribs, &src, dst)
                    .expect("representative exists");
                out.insert(asn, trace);
            }
        }
        out
    }

    /// Announces `prefix` from `attacker` on a copy of the model and reports
    /// every source AS whose trace changed.
    pub fn what_if_announce(&self, attacker: Asn, prefix: Ipv4Net) -> Result<PathDiff> {
        let mut hijacked = self.clone();
        hijacked.announce(attacker, prefix)?;
        let probe = self.probe_address(prefix);
        let before = self.trace_all(&compute_ribs(self), probe, Some(attacker));
        let after = hijacked.trace_all(&compute_ribs(&hijacked), probe, Some(attacker));
        Ok(PathDiff::between(attacker, prefix, probe, &before, &after))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathChange {
    pub source: Asn,
    pub old: Trace,
    pub new: Trace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathDiff {
    pub attacker: Asn,
    pub prefix: Ipv4Net,
    pub probe: Ipv4Addr,
    /// Number of sources compared.
    pub sources: usize,
    pub changed: Vec<PathChange>,
}

impl PathDiff {
    fn between(
        attacker: Asn,
        prefix: Ipv4Net,
        probe: Ipv4Addr,
        before: &BTreeMap<Asn, Trace>,
        after: &BTreeMap<Asn, Trace>,
    ) -> Self {
        let changed = before
            .iter()
            .filter_map(|(asn, old)| {
                let new = &after[asn];
                (old != new).then(|| PathChange {
                    source: *asn,
                    old: old.clone(),
                    new: new.clone(),
                })
            })
            .collect();
        PathDiff {
            attacker,
            prefix,
            probe,
            sources: before.len(),
            changed,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.changed.is_empty()
    }
}
