use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use thiserror::Error;

use crate::Asn;

/// Everything that can go wrong while composing, rendering, compiling or
/// analyzing an emulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("a layer named `{0}` already exists")]
    DuplicateLayer(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("emulation is already rendered")]
    AlreadyRendered,
    #[error("emulation has not been rendered")]
    NotRendered,
    #[error("layer dependency cycle through `{0}`")]
    CyclicLayerDependency(String),
    #[error("layer `{0}` is not a service layer and cannot be exported")]
    NotAServiceLayer(String),

    #[error("virtual node `{0}` is already bound")]
    DuplicateBinding(String),
    #[error("virtual node `{0}` has no binding")]
    UnboundVirtualNode(String),
    #[error("no candidate host for virtual node `{vnode}` matches {filter}")]
    NoMatchingCandidate { vnode: String, filter: String },
    #[error("virtual node `{vnode}` would reuse node `{node}` already taken by `{taken_by}`")]
    BindCollision {
        vnode: String,
        node: String,
        taken_by: String,
    },

    #[error("component version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("malformed component: {0}")]
    MalformedComponent(String),

    #[error("identifier {0} is already in use")]
    DuplicateId(u32),
    #[error("identifier {0} is outside the allowed range 2..=65535")]
    InvalidId(u32),
    #[error("`{0}` is already defined")]
    DuplicateName(String),
    #[error("`{0}` is not a valid name")]
    InvalidName(String),
    #[error("{0} needs an explicit prefix")]
    ExplicitPrefixRequired(String),
    #[error("prefix {0} overlaps {1}")]
    PrefixOverlap(Ipv4Net, String),
    #[error("unknown autonomous system {0}")]
    UnknownAs(Asn),
    #[error("unknown network `{0}`")]
    UnknownNetwork(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("address {0} is already in use on `{1}`")]
    AddressInUse(Ipv4Addr, String),
    #[error("address {0} is outside {1}")]
    AddressOutOfPrefix(Ipv4Addr, Ipv4Net),
    #[error("no free address left on `{0}`")]
    AddressPoolExhausted(String),
    #[error("AS{asn} needs an explicit address on `{network}`")]
    ExplicitAddressRequired { asn: Asn, network: String },
    #[error("node `{0}` is not attached to any network")]
    DetachedNode(String),
    #[error("real-world router `{0}` has no prefixes to announce")]
    EmptyPrefixSource(String),
    #[error("port {0} is already published")]
    PortInUse(u16),
    #[error("remote access cannot be enabled on exchange network `{0}`")]
    IxNetworkNotAllowed(String),
    #[error("path `{0}` is not absolute")]
    RelativePath(String),

    #[error("AS{asn} has no BGP router on ix{ix}")]
    NotAtExchange { asn: Asn, ix: u32 },
    #[error("a session between AS{0} and AS{1} on ix{2} already exists")]
    DuplicateSession(Asn, Asn, u32),

    #[error("`{0}` is not a fully qualified domain name")]
    MalformedFqdn(String),
    #[error("zone `{0}` already has a master")]
    SecondMaster(String),
    #[error("cannot parse record `{0}`")]
    UnparseableRecord(String),
    #[error("zone `{0}` has no nameserver")]
    OrphanZone(String),
    #[error("nameserver `{0}` is not bound to a node")]
    UnboundNameserver(String),

    #[error("container name `{name}` used by both `{first}` and `{second}`")]
    NameCollision {
        name: String,
        first: String,
        second: String,
    },

    #[error("line {line}: {message}")]
    Script { line: usize, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Yaml(#[from] serde_yaml::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
