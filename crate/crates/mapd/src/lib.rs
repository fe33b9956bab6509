//! Backend for the live map: serves the emulation topology, streams packet
//! events to browsers, records and replays them, and bridges node consoles.

pub mod config;
pub mod error;
pub mod events;
pub mod filter;
pub mod recorder;
pub mod runtime;
pub mod server;
pub mod topology;

pub use config::{Config, Mode};
pub use error::{MapdError, Result};
pub use events::{EventHub, EventSource, Observation, ScriptedSource, SharedFilter, SniffEvent};
pub use filter::{Filter, Packet, Proto};
pub use recorder::{Recording, RecordingSummary};
pub use runtime::{DockerCli, LocalRuntime, Runtime};
pub use server::{router, AppState};
pub use topology::{ContainerInfo, TopologyDocument, TopologyNode};
