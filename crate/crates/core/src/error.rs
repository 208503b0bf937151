use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("marginal constraint violated by {max_violation:e}")]
    Marginal { max_violation: f64 },

    #[error("marginal masses differ by {difference:e}")]
    Infeasible { difference: f64 },

    #[error("row {row} of the plan carries no mass")]
    ZeroRow { row: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("space `{0}` has no ambient coordinates")]
    NoPoints(String),

    #[error("embeddings use different references: `{0}` vs `{1}`")]
    RefMismatch(String, String),

    #[error("only {found} pixels above threshold, {required} requested")]
    TooFewPixels { found: usize, required: usize },

    #[error("face {face} has {vertices} vertices; only triangles are supported")]
    NonTriangleFace { face: usize, vertices: usize },

    #[error("mesh graph is disconnected ({unreachable} unreachable vertex pairs)")]
    DisconnectedMesh { unreachable: usize },

    #[error("class `{class}` has {members} member(s); at least 2 are required")]
    ClassTooSmall { class: String, members: usize },

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("correlation undefined: {0}")]
    DegenerateVariance(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::Io { .. } => "IoError",
            Error::Marginal { .. } => "MarginalError",
            Error::Infeasible { .. } => "InfeasibleError",
            Error::ZeroRow { .. } => "ZeroRowError",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NoPoints(_) => "NoPointsError",
            Error::RefMismatch(..) => "RefMismatch",
            Error::TooFewPixels { .. } => "TooFewPixels",
            Error::NonTriangleFace { .. } => "NonTriangleFace",
            Error::DisconnectedMesh { .. } => "DisconnectedMesh",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::IdMismatch(_) => "IdMismatch",
            Error::DegenerateVariance(_) => "DegenerateVariance",
            Error::Config(_) => "ConfigError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
