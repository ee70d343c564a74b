//! Quantum analysis on finite-dimensional operators.

pub mod divdiff;
pub mod dissipative;
pub mod ensemble;
pub mod error;
pub mod hyperop;
pub mod models;
pub mod nonequilibrium;
pub mod operator;
pub mod propagator;
pub mod quad;
pub mod response;
pub mod scalar_fn;
pub mod spectrum;
pub mod taylor;

pub use error::{QaError, Result};
pub use hyperop::{DividedDifferenceKernel, HyperOperator};
pub use models::{build_model, Model, ModelKind, ModelSpec};
pub use operator::{c64, operator_norm, NumericConfig, Operator, C64};
pub use scalar_fn::{FunctionKind, ScalarFunction};
pub use spectrum::{apply_scalar_function, gateaux_fd, spectral_decompose, Spectrum};
pub use taylor::HigherDerivativeRequest;
pub use dissipative::{DissipativeModel, Factorization, Ordering};
pub use nonequilibrium::{DrivenSystem, EntropyExpansion, ForceProtocol, TimeGrid, Waveform};
pub use propagator::StepControl;
pub use response::{ConductivityMethod, ConductivityResult, ResponseSetup};
