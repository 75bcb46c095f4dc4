use thiserror::Error;

use crate::rational::ParseRationalError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("node {node} is not an endpoint of edge ({u}, {v})")]
    NotIncident { node: usize, u: usize, v: usize },

    #[error("({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),

    #[error("share ratio undefined: edge ({0}, {1}) gives a zero share to one endpoint")]
    UndefinedRatio(usize, usize),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("stale deviation: {0}")]
    StaleDeviation(String),

    #[error("instance has {n} nodes, above the exact limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("preference cycle present: {0:?}")]
    PreferenceCycle(Vec<usize>),

    #[error("matching is not stable in the corresponding game")]
    NotStable,

    #[error("invalid contribution game: {0}")]
    InvalidGame(String),

    #[error("invalid strategy profile: {0}")]
    InvalidProfile(String),

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("ratio is unbounded: a stable outcome has zero value while the optimum is positive")]
    UnboundedRatio,

    #[error(transparent)]
    Rational(#[from] ParseRationalError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
