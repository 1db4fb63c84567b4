use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the projection and solve pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported distribution kind `{0}`")]
    UnsupportedDistribution(String),

    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("degree {degree} exceeds the constructed range (max {max})")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("quadrature with {have} nodes cannot integrate degree {degree} exactly (need {need})")]
    InsufficientQuadrature {
        have: usize,
        need: usize,
        degree: usize,
    },

    #[error("eigen-decomposition of the recurrence matrix failed: {0}")]
    EigenSolve(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("term `{term}` is not admissible: {reason}")]
    InadmissibleTerm { term: String, reason: String },

    #[error("germ mismatch between model and basis: {0}")]
    GermMismatch(String),

    #[error("constraint `{constraint}` needs polynomial degree {needed} but the basis stops at {max}; enable truncated projection to accept the truncation")]
    DegreeOverflow {
        constraint: String,
        needed: usize,
        max: usize,
    },

    #[error("safety factor must be positive, got {0}")]
    NonPositiveSafetyFactor(f64),

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("solver did not reach optimality: {0}")]
    Solver(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnsupportedDistribution(_) => "unsupported-distribution",
            Error::InvalidDistribution(_) => "invalid-distribution",
            Error::DegreeOutOfRange { .. } => "degree-out-of-range",
            Error::InsufficientQuadrature { .. } => "insufficient-quadrature",
            Error::EigenSolve(_) => "eigen-solve",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Model(_) => "model",
            Error::InadmissibleTerm { .. } => "inadmissible-term",
            Error::GermMismatch(_) => "germ-mismatch",
            Error::DegreeOverflow { .. } => "degree-overflow",
            Error::NonPositiveSafetyFactor(_) => "non-positive-safety-factor",
            Error::InvalidProbabilities(_) => "invalid-probabilities",
            Error::Solver(_) => "solver",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// Process exit code: 1 for bad input, 2 for a non-optimal solve,
    /// 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(_) => 2,
            Error::EigenSolve(_) | Error::InsufficientQuadrature { .. } => 3,
            _ => 1,
        }
    }
}
