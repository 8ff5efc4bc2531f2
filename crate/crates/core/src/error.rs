use thiserror::Error;

/// Errors raised while building or running a simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("map parse error at line {line}: {reason}")]
    MapParse { line: usize, reason: String },

    #[error("map file is empty")]
    EmptyMap,

    #[error("invalid map parameters: {0}")]
    InvalidMap(String),

    #[error("segment {segment} has no candidate vertices for {kind}")]
    EmptySegment { segment: String, kind: String },

    #[error("segment {segment} has no {kind} point of interest")]
    MissingPoi { segment: String, kind: String },

    #[error("group sizes sum to {sum}, expected {expected}")]
    GroupSizeMismatch { sum: usize, expected: usize },

    #[error("traffic needs at least two nodes, got {0}")]
    TooFewNodes(usize),

    #[error("delivery of unknown message id {0}")]
    UnknownMessage(u32),

    #[error("invalid configuration: {key}: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("run with seed {seed} failed: {source}")]
    RunFailed {
        seed: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl SimError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
