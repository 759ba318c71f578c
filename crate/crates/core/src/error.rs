use thiserror::Error;

#[derive(Debug, Error)]
pub enum PvError {
    #[error("solver did not converge after {iterations} iterations (last residual {residual:e} A)")]
    Solver { iterations: usize, residual: f64 },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("duty cycle {0} outside [0, 1)")]
    Domain(f64),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown controller `{0}`")]
    UnknownController(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PvError {
    /// True for failures of the numerical kernels rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, PvError::Solver { .. } | PvError::Calibration(_))
    }
}

pub type Result<T> = std::result::Result<T, PvError>;
