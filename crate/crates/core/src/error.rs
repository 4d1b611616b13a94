use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LvsError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("location ({x}, {y}) coincides with base station {index}")]
    CoincidentLocation { index: usize, x: f64, y: f64 },

    #[error("invalid shadowing parameters: {0}")]
    InvalidShadowing(String),

    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate detector: {0}")]
    DegenerateDetector(String),

    #[error("feasible search region is empty: {0}")]
    EmptyFeasibleRegion(String),

    #[error("invalid search configuration: {0}")]
    InvalidSearchConfig(String),

    #[error("inconsistent trial plan: {0}")]
    InconsistentPlan(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LvsError {
    fn from(err: std::io::Error) -> Self {
        LvsError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LvsError>;
