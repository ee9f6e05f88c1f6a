use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("segment list is empty")]
    EmptySegments,

    #[error("segment {0} has zero parallel links")]
    ZeroSegment(usize),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("path subset is empty")]
    EmptySubset,

    #[error("insufficient signal: fewer than two usable bounce numbers")]
    InsufficientSignal,

    #[error("fidelity {fidelity} is not reachable by {kind} noise")]
    UnreachableFidelity { kind: String, fidelity: f64 },

    #[error("link sets of the two paths are equal")]
    EqualLinkSets,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
