use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("site {0} is not a member of the set")]
    NotMember(String),

    #[error("missing coupling constant for site {0}")]
    MissingCoupling(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    /// `H - z` is numerically singular; callers at real energy read this as
    /// "E lies in the spectrum".
    #[error("singular operator (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
