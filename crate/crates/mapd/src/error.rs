use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapdError {
    #[error("container `{container}` lacks label `{label}`")]
    MissingLabels { container: String, label: String },
    #[error("topology source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("filter rejected: {0}")]
    FilterRejected(String),
    #[error("unknown recording `{0}`")]
    UnknownRecording(String),
    #[error("interval must be at least 1 ms, got {0}")]
    InvalidInterval(u64),
    #[error("a recording is already running")]
    AlreadyRecording,
    #[error("no recording is running")]
    NotRecording,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not running")]
    NodeNotRunning(String),
    #[error("consoles need live mode")]
    OfflineMode,
    #[error("runtime: {0}")]
    Runtime(String),
}

impl MapdError {
    /// Stable machine-readable name, used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            MapdError::MissingLabels { .. } => "MissingLabels",
            MapdError::SourceUnavailable(_) => "SourceUnavailable",
            MapdError::FilterRejected(_) => "FilterRejected",
            MapdError::UnknownRecording(_) => "UnknownRecording",
            MapdError::InvalidInterval(_) => "InvalidInterval",
            MapdError::AlreadyRecording => "AlreadyRecording",
            MapdError::NotRecording => "NotRecording",
            MapdError::UnknownNode(_) => "UnknownNode",
            MapdError::NodeNotRunning(_) => "NodeNotRunning",
            MapdError::OfflineMode => "OfflineMode",
            MapdError::Runtime(_) => "Runtime",
        }
    }
}

pub type Result<T> = std::result::Result<T, MapdError>;
