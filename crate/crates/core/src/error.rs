use thiserror::Error;

/// Errors raised by the symbolic and numeric layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("frame is not bracket generating at the base point within depth {cap}")]
    NotBracketGenerating { cap: usize },

    #[error("integrator step underflow after {steps} substeps (stiff field or blow-up)")]
    StepUnderflow { steps: usize },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bracket-path correction stalled; residual history {history:?}")]
    CorrectionStalled { history: Vec<f64> },

    #[error("no admissible epsilon in the dyadic grid: {0}")]
    NoEpsilon(String),

    #[error("solver failed: {0}")]
    SolverFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}
