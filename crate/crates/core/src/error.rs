use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is disconnected: {components} components")]
    Disconnected { components: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid gossip matrix: {0}")]
    InvalidGossip(String),

    #[error("chebyshev acceleration undefined: mixing factor is zero")]
    ChebyshevUndefined,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("preset {preset} rejected: {reason}")]
    Preset { preset: String, reason: String },

    #[error("weight triple violates assumptions: {0}")]
    InvalidTriple(String),

    #[error("single-agent networks are unsupported (no consensus matrix with Null(C) = span(1))")]
    SingleAgent,

    #[error("divergence at iteration {iter}: {iterate} has entry {value}")]
    Diverged {
        iter: usize,
        iterate: &'static str,
        value: f64,
    },

    #[error("inconsistent history: {0}")]
    InconsistentHistory(String),

    #[error("iteration cap of {cap} exceeded")]
    IterationCap { cap: usize },

    #[error("reference cross-check failed: deviation {deviation:e} exceeds {tolerance:e}")]
    ReferenceMismatch { deviation: f64, tolerance: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
