use thiserror::Error;

/// Errors raised by the operator calculus.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaError {
    #[error("operator is not Hermitian: ||A - A^dag||_F = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigen-decomposition failed to converge")]
    DecompositionFailure,

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("time integration failed: {0}")]
    StepFailure(String),

    #[error("quadrature cost {requested:.3e} exceeds the configured cap {cap:.3e}")]
    QuadratureBudgetExceeded { requested: f64, cap: f64 },

    #[error("logarithm undefined: {0}")]
    LogFailure(String),

    #[error("hyperoperator kernel is singular: {0}")]
    KernelSingularity(String),

    #[error("constant {index} does not commute with the Hamiltonian (||[H_j, H]|| = {norm:.3e})")]
    NotConserved { index: usize, norm: f64 },

    #[error("constants {j} and {k} are not thermally orthogonal (<H_j H_k> = {overlap:.3e})")]
    NotOrthogonal { j: usize, k: usize, overlap: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("series diverges: successive-term ratio {ratio:.3} >= 1")]
    DivergenceWarning { ratio: f64 },

    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed operator data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, QaError>;
