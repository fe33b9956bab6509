//! Internet emulator toolkit: compose layered emulations, render them into a
//! concrete model, compile that model into container artifacts and analyze
//! the BGP control plane it implies.

pub mod analysis;
pub mod base;
pub mod compile;
pub mod dns;
pub mod emulator;
pub mod error;
pub mod fixtures;
pub mod routing;
pub mod script;
pub mod service;

pub type Asn = u32;

pub use base::{Base, Node, NodeKey, Role, Scope};
pub use dns::DnsLayer;
pub use emulator::{Action, Binding, Emulator, Filter, Layer, LayerBody, RenderedEmulation};
pub use error::{Error, Result};
pub use routing::{Ebgp, PeerRelationship, Routing};
pub use service::ServiceLayer;
