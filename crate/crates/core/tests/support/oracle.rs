//! Brute-force reference for the BGP fixed point: enumerate every simple
//! path, drop the ones an export filter would stop, then search all
//! assignments of paths to ASes for the stable ones.

#![allow(dead_code)]

use std::collections::BTreeMap;

use emu_core::analysis::ControlPlaneModel;
use emu_core::PeerRelationship;
use ipnet::Ipv4Net;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Asn = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Own,
    Customer,
    Peer,
    Provider,
    Unfiltered,
}

impl Class {
    fn pref(self) -> u32 {
        match self {
            Class::Own => 40,
            Class::Customer => 30,
            Class::Peer => 20,
            Class::Provider | Class::Unfiltered => 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Topo {
    pub ases: Vec<Asn>,
    /// (left, right, relationship); with Provider the left side sells transit.
    pub links: Vec<(Asn, Asn, PeerRelationship)>,
    pub origins: Vec<(Asn, Ipv4Net)>,
}

impl Topo {
    /// Class of `b` as seen from `a`.
    pub fn class(&self, a: Asn, b: Asn) -> Option<Class> {
        self.links.iter().find_map(|&(l, r, rel)| {
            let c = match rel {
                PeerRelationship::Peer => Class::Peer,
                PeerRelationship::Unfiltered => Class::Unfiltered,
                PeerRelationship::Provider if l == a => Class::Customer,
                PeerRelationship::Provider => Class::Provider,
            };
            ((l == a && r == b) || (l == b && r == a)).then_some(c)
        })
    }

    pub fn provider_peer_only(&self) -> bool {
        self.links
            .iter()
            .all(|l| l.2 != PeerRelationship::Unfiltered)
    }

    pub fn model(&self) -> ControlPlaneModel {
        let mut m = ControlPlaneModel::new();
        for &a in &self.ases {
            m.add_as(a);
        }
        for &(l, r, rel) in &self.links {
            m.add_link(l, r, rel).unwrap();
        }
        for &(a, p) in &self.origins {
            m.originate(a, p).unwrap();
        }
        m
    }

    fn prefixes(&self) -> BTreeMap<Ipv4Net, Vec<Asn>> {
        let mut out: BTreeMap<Ipv4Net, Vec<Asn>> = BTreeMap::new();
        for &(a, p) in &self.origins {
            out.entry(p).or_default().push(a);
        }
        out
    }
}

/// 2 to 5 ASes, provider edges follow a random rank order so the customer
/// graph stays acyclic.
pub fn random_topo(seed: u64) -> Topo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let mut ases: Vec<Asn> = (0..n).map(|i| 10 + i as Asn * 7).collect();
    ases.shuffle(&mut rng);
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !rng.gen_bool(0.6) {
                continue;
            }
            let rel = match rng.gen_range(0..5) {
                0 | 1 => PeerRelationship::Provider,
                2 | 3 => PeerRelationship::Peer,
                _ => PeerRelationship::Unfiltered,
            };
            // ases[i] ranks above ases[j]
            if rng.gen_bool(0.5) || rel == PeerRelationship::Provider {
                links.push((ases[i], ases[j], rel));
            } else {
                links.push((ases[j], ases[i], rel));
            }
        }
    }
    let mut origins: Vec<(Asn, Ipv4Net)> = ases
        .iter()
        .map(|&a| (a, format!("10.{a}.0.0/24").parse().unwrap()))
        .collect();
    if n >= 3 && rng.gen_bool(0.3) {
        let anycast: Ipv4Net = "192.0.2.0/24".parse().unwrap();
        origins.push((ases[0], anycast));
        origins.push((ases[n - 1], anycast));
    }
    ases.sort();
    Topo {
        ases,
        links,
        origins,
    }
}

fn exports(route: Class, to: Class) -> bool {
    match to {
        Class::Customer | Class::Unfiltered => true,
        Class::Peer | Class::Provider => matches!(route, Class::Own | Class::Customer),
        Class::Own => false,
    }
}

/// Every simple path from `from` to an origin: `[from, x1, ..., origin]`.
fn all_paths(t: &Topo, from: Asn, origins: &[Asn]) -> Vec<Vec<Asn>> {
    fn walk(t: &Topo, path: &mut Vec<Asn>, origins: &[Asn], out: &mut Vec<Vec<Asn>>) {
        let here = *path.last().unwrap();
        if path.len() > 1 && origins.contains(&here) {
            out.push(path.clone());
            return;
        }
        for &next in &t.ases {
            if path.contains(&next) || t.class(here, next).is_none() {
                continue;
            }
            path.push(next);
            walk(t, path, origins, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(t, &mut vec![from], origins, &mut out);
    out
}

/// Class of the route a path gives its first AS.
fn path_class(t: &Topo, path: &[Asn]) -> Class {
    if path.len() == 1 {
        Class::Own
    } else {
        t.class(path[0], path[1]).unwrap()
    }
}

/// The path survives every export filter along the way.
fn exportable(t: &Topo, path: &[Asn]) -> bool {
    (0..path.len() - 1).all(|i| {
        let sender = path[i + 1];
        let route = path_class(t, &path[i + 1..]);
        let receiver = t.class(sender, path[i]).unwrap();
        exports(route, receiver)
    })
}

fn better(t: &Topo, a: &[Asn], b: &[Asn]) -> bool {
    let key = |p: &[Asn]| (std::cmp::Reverse(path_class(t, p).pref()), p.len(), p[1]);
    key(a) < key(b)
}

/// Selected path per AS (`None` = no route), keyed by prefix. Errors when
/// the number of stable assignments is not exactly one.
pub type Selection = BTreeMap<Ipv4Net, BTreeMap<Asn, Option<Vec<Asn>>>>;

pub fn oracle(t: &Topo) -> Result<Selection, String> {
    let mut result = BTreeMap::new();
    for (prefix, origins) in t.prefixes() {
        let free: Vec<Asn> = t
            .ases
            .iter()
            .copied()
            .filter(|a| !origins.contains(a))
            .collect();
        let candidates: Vec<Vec<Vec<Asn>>> = free
            .iter()
            .map(|&a| {
                all_paths(t, a, &origins)
                    .into_iter()
                    .filter(|p| exportable(t, p))
                    .collect()
            })
            .collect();
        let mut assign: BTreeMap<Asn, Option<Vec<Asn>>> =
            origins.iter().map(|&o| (o, Some(vec![o]))).collect();
        let mut solutions = Vec::new();
        search(t, &free, &candidates, 0, &mut assign, &mut solutions);
        if solutions.len() != 1 {
            return Err(format!(
                "{prefix}: {} stable assignments in {t:?}",
                solutions.len()
            ));
        }
        result.insert(prefix, solutions.pop().unwrap());
    }
    Ok(result)
}

fn consistent(assign: &BTreeMap<Asn, Option<Vec<Asn>>>) -> bool {
    for path in assign.values().flatten() {
        for (i, hop) in path.iter().enumerate().skip(1) {
            match assign.get(hop) {
                Some(Some(p)) if p[..] != path[i..] => return false,
                Some(None) => return false,
                _ => {}
            }
        }
    }
    true
}

fn stable(t: &Topo, free: &[Asn], assign: &BTreeMap<Asn, Option<Vec<Asn>>>) -> bool {
    free.iter().all(|&a| {
        let mut best: Option<Vec<Asn>> = None;
        for &n in &t.ases {
            let Some(Some(np)) = assign.get(&n) else {
                continue;
            };
            if n == a || np.contains(&a) || t.class(a, n).is_none() {
                continue;
            }
            let route = path_class(t, np);
            if !exports(route, t.class(n, a).unwrap()) {
                continue;
            }
            let mut cand = vec![a];
            cand.extend(np);
            if best.as_ref().is_none_or(|b| better(t, &cand, b)) {
                best = Some(cand);
            }
        }
        assign[&a] == best
    })
}

fn search(
    t: &Topo,
    free: &[Asn],
    candidates: &[Vec<Vec<Asn>>],
    i: usize,
    assign: &mut BTreeMap<Asn, Option<Vec<Asn>>>,
    solutions: &mut Vec<BTreeMap<Asn, Option<Vec<Asn>>>>,
) {
    if i == free.len() {
        if stable(t, free, assign) {
            solutions.push(assign.clone());
        }
        return;
    }
    let options = candidates[i]
        .iter()
        .cloned()
        .map(Some)
        .chain(std::iter::once(None));
    for option in options {
        assign.insert(free[i], option);
        if consistent(assign) {
            search(t, free, candidates, i + 1, assign, solutions);
        }
        assign.remove(&free[i]);
    }
}

/// Valley-free: uphill, at most one peer edge, then downhill.
pub fn valley_free(t: &Topo, path: &[Asn]) -> bool {
    let mut phase = 0;
    for w in path.windows(2) {
        let step = match t.class(w[0], w[1]).unwrap() {
            Class::Provider => 0,
            Class::Peer => 1,
            Class::Customer => 2,
            _ => return false,
        };
        if step < phase || (step == 1 && phase == 1) {
            return false;
        }
        phase = if step == 1 { 2 } else { step };
    }
    true
}
