use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: {n} qubits exceeds cap of {cap}")]
    CapExceeded { what: &'static str, n: usize, cap: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("gate {0} is not Clifford")]
    NotClifford(String),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("bad range: {0}")]
    BadRange(String),
    #[error("qubit index {index} out of range for {n} qubits")]
    BadIndex { index: usize, n: usize },
    #[error("qubit set is empty")]
    EmptySet,
    #[error("overall superoperator was not accumulated for this trajectory")]
    MissingSuperop,
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("no convergence: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("degenerate marginal (covariance {covariance})")]
    DegenerateMarginal { covariance: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
