use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatinarError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {value} outside [0, 1] ({context})")]
    Probability { value: f64, context: String },

    #[error("process is not stationary: spectral radius {radius:.6} >= 1")]
    NonStationary { radius: f64 },

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence { iterations: usize, context: String },

    #[error("zero matrix has no leading singular triplet")]
    ZeroMatrix,

    #[error("zero variance in series entry {0}")]
    ZeroVariance(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("scenario definition unavailable: {0}")]
    ScenarioUnavailable(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MatinarError {
    /// Validation failures (bad input) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            MatinarError::Singular(_)
                | MatinarError::NoConvergence { .. }
                | MatinarError::ZeroMatrix
        )
    }
}

pub type Result<T> = std::result::Result<T, MatinarError>;
