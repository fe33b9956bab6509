//! The emulator object: layers, bindings, rendering and components.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base::{Base, NodeKey, Role, Scope};
use crate::dns::{DnsLayer, RenderedZone};
use crate::routing::{self, Ebgp, EbgpSession, Routing, RoutingPlan};
use crate::service::ServiceLayer;
use crate::{Asn, Error, Result};

/// Current component document version.
pub const COMPONENT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Base,
    Service,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerBody {
    Base(Base),
    Routing(Routing),
    Ebgp(Ebgp),
    Dns(DnsLayer),
    Service(ServiceLayer),
}

impl LayerBody {
    fn rank(&self) -> u8 {
        match self {
            LayerBody::Base(_) => 0,
            LayerBody::Routing(_) => 1,
            LayerBody::Ebgp(_) => 2,
            LayerBody::Dns(_) | LayerBody::Service(_) => 3,
        }
    }

    fn default_name(&self) -> &'static str {
        match self {
            LayerBody::Base(_) => "base",
            LayerBody::Routing(_) => "routing",
            LayerBody::Ebgp(_) => "ebgp",
            LayerBody::Dns(_) => "dns",
            LayerBody::Service(_) => "service",
        }
    }

    /// Virtual node names a service layer refers to.
    pub fn virtual_nodes(&self) -> Vec<String> {
        match self {
            LayerBody::Dns(dns) => dns.virtual_nodes().map(str::to_string).collect(),
            LayerBody::Service(svc) => svc.virtual_nodes().map(str::to_string).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    name: String,
    depends_on: BTreeSet<String>,
    body: LayerBody,
}

impl Layer {
    pub fn new(name: impl Into<String>, body: LayerBody) -> Self {
        Layer {
            name: name.into(),
            depends_on: BTreeSet::new(),
            body,
        }
    }

    pub fn depends_on(mut self, layer: impl Into<String>) -> Self {
        self.depends_on.insert(layer.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dependencies(&self) -> &BTreeSet<String> {
        &self.depends_on
    }

    pub fn kind(&self) -> LayerKind {
        match self.body {
            LayerBody::Dns(_) | LayerBody::Service(_) => LayerKind::Service,
            _ => LayerKind::Base,
        }
    }

    pub fn body(&self) -> &LayerBody {
        &self.body
    }

    pub fn body_mut(&mut self) -> &mut LayerBody {
        &mut self.body
    }
}

macro_rules! layer_from {
    ($ty:ty, $variant:ident) => {
        impl From<$ty> for Layer {
            fn from(value: $ty) -> Self {
                let body = LayerBody::$variant(value);
                Layer::new(body.default_name(), body)
            }
        }
    };
}

layer_from!(Base, Base);
layer_from!(Routing, Routing);
layer_from!(Ebgp, Ebgp);
layer_from!(DnsLayer, Dns);
layer_from!(ServiceLayer, Service);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Lowest ASN, then lexicographically smallest node name.
    #[default]
    First,
    /// Uniform choice driven by the emulator seed.
    Random,
    /// A new host in the matched AS.
    New,
}

/// Criteria selecting candidate hosts for a virtual node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub asn: Option<Asn>,
    /// Anchored glob over node names.
    pub node_name: Option<String>,
    pub ip: Option<Ipv4Addr>,
    pub allow_reuse: bool,
}

impl Filter {
    pub fn any() -> Self {
        Filter::default()
    }

    pub fn asn(asn: Asn) -> Self {
        Filter {
            asn: Some(asn),
            ..Filter::default()
        }
    }

    pub fn ip(ip: Ipv4Addr) -> Self {
        Filter {
            ip: Some(ip),
            ..Filter::default()
        }
    }

    pub fn node_name(mut self, pattern: &str) -> Self {
        self.node_name = Some(pattern.to_string());
        self
    }

    pub fn allow_reuse(mut self) -> Self {
        self.allow_reuse = true;
        self
    }

    fn matches(&self, node: &crate::base::Node) -> bool {
        if node.role != Role::Host {
            return false;
        }
        if self.asn.is_some_and(|asn| asn != node.asn) {
            return false;
        }
        if let Some(pattern) = &self.node_name {
            let ok = glob::Pattern::new(pattern)
                .map(|p| p.matches(&node.name))
                .unwrap_or(*pattern == node.name);
            if !ok {
                return false;
            }
        }
        if let Some(ip) = self.ip {
            if !node.interfaces.iter().any(|i| i.address == ip) {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(asn) = self.asn {
            parts.push(format!("asn={asn}"));
        }
        if let Some(name) = &self.node_name {
            parts.push(format!("nodeName={name}"));
        }
        if let Some(ip) = self.ip {
            parts.push(format!("ip={ip}"));
        }
        if self.allow_reuse {
            parts.push("allowReuse".into());
        }
        write!(f, "Filter({})", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub vnode: String,
    pub filter: Filter,
    pub action: Action,
}

impl Binding {
    pub fn new(vnode: &str, filter: Filter) -> Self {
        Binding {
            vnode: vnode.to_string(),
            filter,
            action: Action::First,
        }
    }

    pub fn with_action(mut self, action: Action) -> Self {
        self.action = action;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegistryKey {
    pub scope: String,
    pub kind: String,
    pub name: String,
}

impl fmt::Display for RegistryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.scope, self.kind, self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegistryEntry {
    AutonomousSystem {
        asn: Asn,
    },
    InternetExchange {
        id: u32,
    },
    Network {
        qualified_name: String,
        prefix: ipnet::Ipv4Net,
    },
    Node {
        key: NodeKey,
        role: Role,
    },
    Layer {
        position: usize,
    },
    Binding {
        vnode: String,
        node: NodeKey,
    },
}

/// Index of every rendered object keyed by (scope, kind, name).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    entries: BTreeMap<RegistryKey, RegistryEntry>,
}

impl Registry {
    fn insert(&mut self, scope: &str, kind: &str, name: &str, entry: RegistryEntry) -> Result<()> {
        let key = RegistryKey {
            scope: scope.to_string(),
            kind: kind.to_string(),
            name: name.to_string(),
        };
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateName(key.to_string()));
        }
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn get(&self, scope: &str, kind: &str, name: &str) -> Option<&RegistryEntry> {
        self.entries.get(&RegistryKey {
            scope: scope.to_string(),
            kind: kind.to_string(),
            name: name.to_string(),
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&RegistryKey, &RegistryEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nodes of any role.
    pub fn node_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| matches!(e, RegistryEntry::Node { .. }))
            .count()
    }

    pub fn count_role(&self, role: Role) -> usize {
        self.entries
            .values()
            .filter(|e| matches!(e, RegistryEntry::Node { role: r, .. } if *r == role))
            .count()
    }

    fn build(base: &Base, layers: &[String], bindings: &BTreeMap<String, NodeKey>) -> Result<Self> {
        let mut reg = Registry::default();
        for (i, name) in layers.iter().enumerate() {
            reg.insert(
                "global",
                "layer",
                name,
                RegistryEntry::Layer { position: i },
            )?;
        }
        for ix in base.internet_exchanges() {
            let name = format!("ix{}", ix.id);
            reg.insert(
                "ix",
                "ix",
                &name,
                RegistryEntry::InternetExchange { id: ix.id },
            )?;
        }
        for asys in base.autonomous_systems() {
            reg.insert(
                "global",
                "as",
                &asys.asn.to_string(),
                RegistryEntry::AutonomousSystem { asn: asys.asn },
            )?;
        }
        for net in base.networks() {
            let scope = net.scope.registry_text();
            reg.insert(
                &scope,
                "net",
                &net.name,
                RegistryEntry::Network {
                    qualified_name: net.qualified_name(),
                    prefix: net.prefix,
                },
            )?;
        }
        for node in base.nodes() {
            let key = node.key();
            let kind = match node.role {
                Role::Host => "hnode",
                Role::Router => "rnode",
                Role::RouteServer => "rsnode",
                Role::RealWorldRouter => "rwnode",
            };
            reg.insert(
                &key.scope.registry_text(),
                kind,
                &node.name,
                RegistryEntry::Node {
                    key: key.clone(),
                    role: node.role,
                },
            )?;
        }
        for (vnode, key) in bindings {
            reg.insert(
                "global",
                "binding",
                vnode,
                RegistryEntry::Binding {
                    vnode: vnode.clone(),
                    node: key.clone(),
                },
            )?;
        }
        Ok(reg)
    }
}

/// The frozen result of [`Emulator::render`].
#[derive(Clone, Debug, Serialize)]
pub struct RenderedEmulation {
    seed: u64,
    layers: Vec<String>,
    base: Base,
    routing: Option<RoutingPlan>,
    sessions: Vec<EbgpSession>,
    loopbacks: BTreeMap<NodeKey, Ipv4Addr>,
    bindings: BTreeMap<String, NodeKey>,
    zones: Vec<RenderedZone>,
    #[serde(serialize_with = "serialize_registry")]
    registry: Registry,
}

fn serialize_registry<S: serde::Serializer>(reg: &Registry, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(reg.len()))?;
    for (k, v) in reg.entries() {
        seq.serialize_element(&(k.to_string(), v))?;
    }
    seq.end()
}

impl RenderedEmulation {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Layer names in the order they were configured.
    pub fn layer_order(&self) -> &[String] {
        &self.layers
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn routing_plan(&self) -> Option<&RoutingPlan> {
        self.routing.as_ref()
    }

    pub fn sessions(&self) -> &[EbgpSession] {
        &self.sessions
    }

    pub fn loopback(&self, key: &NodeKey) -> Option<Ipv4Addr> {
        self.loopbacks.get(key).copied()
    }

    /// Virtual node name -> physical node.
    pub fn bindings(&self) -> &BTreeMap<String, NodeKey> {
        &self.bindings
    }

    pub fn zones(&self) -> &[RenderedZone] {
        &self.zones
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Canonical serialization of the whole rendered model.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rendered model serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ComponentDocument {
    component_version: u64,
    layers: Vec<ComponentLayer>,
    virtual_nodes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ComponentLayer {
    name: String,
    kind: LayerKind,
    #[serde(default)]
    depends_on: Vec<String>,
    service: ServiceBody,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ServiceBody {
    Dns(DnsLayer),
    Generic(ServiceLayer),
}

/// An emulation under composition.
#[derive(Debug)]
pub struct Emulator {
    seed: u64,
    layers: IndexMap<String, Layer>,
    bindings: Vec<Binding>,
    rendered: Option<Arc<RenderedEmulation>>,
}

impl Default for Emulator {
    fn default() -> Self {
        Emulator::new(0)
    }
}

impl Emulator {
    pub fn new(seed: u64) -> Self {
        Emulator {
            seed,
            layers: IndexMap::new(),
            bindings: Vec::new(),
            rendered: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn ensure_open(&self) -> Result<()> {
        if self.rendered.is_some() {
            Err(Error::AlreadyRendered)
        } else {
            Ok(())
        }
    }

    pub fn add_layer(&mut self, layer: impl Into<Layer>) -> Result<&mut Layer> {
        self.ensure_open()?;
        let layer = layer.into();
        if self.layers.contains_key(&layer.name) {
            return Err(Error::DuplicateLayer(layer.name));
        }
        let name = layer.name.clone();
        Ok(self.layers.entry(name).or_insert(layer))
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.get(name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Result<&mut Layer> {
        self.ensure_open()?;
        self.layers
            .get_mut(name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.values()
    }

    pub fn add_binding(&mut self, binding: Binding) -> Result<()> {
        self.ensure_open()?;
        if self.bindings.iter().any(|b| b.vnode == binding.vnode) {
            return Err(Error::DuplicateBinding(binding.vnode));
        }
        self.bindings.push(binding);
        Ok(())
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn is_rendered(&self) -> bool {
        self.rendered.is_some()
    }

    pub fn rendered(&self) -> Result<Arc<RenderedEmulation>> {
        self.rendered.clone().ok_or(Error::NotRendered)
    }

    /// Layer names in configuration order.
    pub fn layer_order(&self) -> Result<Vec<String>> {
        let names: Vec<&String> = self.layers.keys().collect();
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); names.len()];
        for (i, layer) in self.layers.values().enumerate() {
            for (j, other) in self.layers.values().enumerate() {
                if other.body.rank() < layer.body.rank() {
                    deps[i].insert(j);
                }
            }
            for dep in &layer.depends_on {
                let j = self
                    .layers
                    .get_index_of(dep)
                    .ok_or_else(|| Error::UnknownLayer(dep.clone()))?;
                deps[i].insert(j);
            }
        }
        let mut done = vec![false; names.len()];
        let mut order = Vec::with_capacity(names.len());
        while order.len() < names.len() {
            let next = (0..names.len())
                .filter(|&i| !done[i] && deps[i].iter().all(|&j| done[j]))
                .min_by_key(|&i| (self.layers[i].body.rank(), i));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(names[i].clone());
                }
                None => {
                    let stuck = (0..names.len()).find(|&i| !done[i]).expect("some left");
                    return Err(Error::CyclicLayerDependency(names[stuck].clone()));
                }
            }
        }
        Ok(order)
    }

    /// Merges layers, binds virtual nodes and freezes the result.
    pub fn render(&mut self) -> Result<Arc<RenderedEmulation>> {
        self.ensure_open()?;
        let order = self.layer_order()?;

        let mut base: Option<Base> = None;
        let mut routing_enabled = false;
        let mut sessions = Vec::new();
        let mut services = Vec::new();
        for name in &order {
            let layer = &self.layers[name];
            match &layer.body {
                LayerBody::Base(b) => {
                    if base.is_some() {
                        return Err(Error::DuplicateLayer(name.clone()));
                    }
                    let mut b = b.clone();
                    b.finalize()?;
                    base = Some(b);
                }
                LayerBody::Routing(_) => routing_enabled = true,
                LayerBody::Ebgp(ebgp) => {
                    let b = base.get_or_insert_with(Base::new);
                    sessions.extend(ebgp.configure(b)?);
                }
                LayerBody::Dns(_) | LayerBody::Service(_) => services.push(layer),
            }
        }
        let mut base = base.unwrap_or_default();

        let mut referenced = Vec::new();
        for layer in &services {
            for vnode in layer.body.virtual_nodes() {
                if !referenced.contains(&vnode) {
                    referenced.push(vnode);
                }
            }
        }
        let bindings = self.resolve_bindings(&mut base, &referenced)?;

        let mut zones = Vec::new();
        for layer in &services {
            let fragments = match &layer.body {
                LayerBody::Dns(dns) => {
                    let out = dns.configure(&base, &bindings, 1)?;
                    zones.extend(out.zones);
                    out.fragments.into_iter().collect()
                }
                LayerBody::Service(svc) => svc.configure(&bindings)?,
                _ => unreachable!("only service layers are queued"),
            };
            for (key, fragment) in fragments {
                base.node_mut(&key)
                    .ok_or_else(|| Error::UnknownNode(key.to_string()))?
                    .apply_service(&fragment);
            }
        }

        let loopbacks = routing::assign_loopbacks(&base)?;
        let plan = if routing_enabled {
            Some(routing::plan_routing(&base)?)
        } else {
            None
        };
        let registry = Registry::build(&base, &order, &bindings)?;
        let rendered = Arc::new(RenderedEmulation {
            seed: self.seed,
            layers: order,
            base,
            routing: plan,
            sessions,
            loopbacks,
            bindings,
            zones,
            registry,
        });
        self.rendered = Some(rendered.clone());
        Ok(rendered)
    }

    fn resolve_bindings(
        &self,
        base: &mut Base,
        referenced: &[String],
    ) -> Result<BTreeMap<String, NodeKey>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // node -> (vnode that took it, whether it allows reuse)
        let mut taken: BTreeMap<NodeKey, (String, bool)> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for binding in &self.bindings {
            if !referenced.contains(&binding.vnode) {
                continue;
            }
            let filter = &binding.filter;
            let key = if binding.action == Action::New {
                let asn = match filter.asn {
                    Some(asn) => asn,
                    None => base
                        .autonomous_systems()
                        .find(|a| !a.networks.is_empty())
                        .map(|a| a.asn)
                        .ok_or_else(|| Error::NoMatchingCandidate {
                            vnode: binding.vnode.clone(),
                            filter: filter.to_string(),
                        })?,
                };
                let has_net = base
                    .autonomous_system(asn)
                    .is_some_and(|a| !a.networks.is_empty());
                if !has_net {
                    return Err(Error::NoMatchingCandidate {
                        vnode: binding.vnode.clone(),
                        filter: filter.to_string(),
                    });
                }
                base.create_bound_host(asn, &binding.vnode)?
            } else {
                let mut candidates: Vec<(Asn, String, NodeKey)> = base
                    .nodes()
                    .filter(|n| filter.matches(n))
                    .map(|n| (n.asn, n.name.clone(), n.key()))
                    .collect();
                candidates.sort();
                if candidates.is_empty() {
                    return Err(Error::NoMatchingCandidate {
                        vnode: binding.vnode.clone(),
                        filter: filter.to_string(),
                    });
                }
                let free: Vec<&NodeKey> = candidates
                    .iter()
                    .map(|(_, _, k)| k)
                    .filter(|k| match taken.get(*k) {
                        None => true,
                        Some((_, reuse)) => *reuse && filter.allow_reuse,
                    })
                    .collect();
                if free.is_empty() {
                    let node = candidates[0].2.clone();
                    let taken_by = taken[&node].0.clone();
                    return Err(Error::BindCollision {
                        vnode: binding.vnode.clone(),
                        node: node.to_string(),
                        taken_by,
                    });
                }
                match binding.action {
                    Action::Random => free[rng.gen_range(0..free.len())].clone(),
                    _ => free[0].clone(),
                }
            };
            taken
                .entry(key.clone())
                .or_insert_with(|| (binding.vnode.clone(), filter.allow_reuse));
            out.insert(binding.vnode.clone(), key);
        }
        for vnode in referenced {
            if !out.contains_key(vnode) {
                return Err(Error::UnboundVirtualNode(vnode.clone()));
            }
        }
        Ok(out)
    }

    /// Serializes the named service layers as a component document.
    pub fn export_component_string(&self, names: &[&str]) -> Result<String> {
        let mut layers = Vec::new();
        let mut vnodes = Vec::new();
        for &name in names {
            let layer = self
                .layers
                .get(name)
                .ok_or_else(|| Error::UnknownLayer(name.to_string()))?;
            let service = match &layer.body {
                LayerBody::Dns(dns) => ServiceBody::Dns(dns.clone()),
                LayerBody::Service(svc) => ServiceBody::Generic(svc.clone()),
                _ => return Err(Error::NotAServiceLayer(name.to_string())),
            };
            for v in layer.body.virtual_nodes() {
                if !vnodes.contains(&v) {
                    vnodes.push(v);
                }
            }
            layers.push(ComponentLayer {
                name: layer.name.clone(),
                kind: LayerKind::Service,
                depends_on: layer.depends_on.iter().cloned().collect(),
                service,
            });
        }
        let doc = ComponentDocument {
            component_version: COMPONENT_VERSION,
            layers,
            virtual_nodes: vnodes,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn export_component(&self, names: &[&str], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.export_component_string(names)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn import_component_str(text: &str) -> Result<Vec<Layer>> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedComponent(e.to_string()))?;
        let version = value
            .get("componentVersion")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedComponent("missing componentVersion".into()))?;
        if version != COMPONENT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: COMPONENT_VERSION,
            });
        }
        let doc: ComponentDocument =
            serde_json::from_value(value).map_err(|e| Error::MalformedComponent(e.to_string()))?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for cl in doc.layers {
            if cl.kind != LayerKind::Service {
                return Err(Error::MalformedComponent(format!(
                    "layer `{}` is not a service layer",
                    cl.name
                )));
            }
            if !seen.insert(cl.name.clone()) {
                return Err(Error::MalformedComponent(format!(
                    "layer `{}` appears twice",
                    cl.name
                )));
            }
            let body = match cl.service {
                ServiceBody::Dns(dns) => LayerBody::Dns(dns),
                ServiceBody::Generic(svc) => LayerBody::Service(svc),
            };
            let mut layer = Layer::new(cl.name, body);
            layer.depends_on = cl.depends_on.into_iter().collect();
            out.push(layer);
        }
        Ok(out)
    }

    pub fn import_component(path: impl AsRef<Path>) -> Result<Vec<Layer>> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::import_component_str(&text)
    }
}

/// Every node with the given role in the rendered base.
pub fn nodes_with_role(rendered: &RenderedEmulation, role: Role) -> Vec<NodeKey> {
    rendered
        .base()
        .nodes()
        .filter(|n| n.role == role)
        .map(|n| n.key())
        .collect()
}

/// The ASN a node belongs to (the exchange id for route servers).
pub fn scope_asn(key: &NodeKey) -> Asn {
    match key.scope {
        Scope::As(asn) | Scope::Ix(asn) => asn,
    }
}
