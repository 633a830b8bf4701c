use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the solvers and the verification harness.
///
/// Each message starts with the name of the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: invalid input: {msg}")]
    Invalid { module: &'static str, msg: String },

    #[error("{module}: length mismatch (expected {expected}, found {found})")]
    LengthMismatch {
        module: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("caputo_l1: level {level} outside 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error(
        "{module}: no convergence at level {level} after {iterations} iterations \
         (residual {residual:.3e})"
    )]
    Nonconvergence {
        module: &'static str,
        level: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solver: {0}")]
    LinearSolver(String),

    #[error("{module}: non-finite value at level {level}")]
    NonFinite { module: &'static str, level: usize },

    #[error(
        "{module}: step restriction violated at j = {j}: lambda*tau_j^alpha = {lhs:.6e}, \
         1/Gamma(2-alpha) = {rhs:.6e}"
    )]
    StepRestriction {
        module: &'static str,
        j: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("error_harness: meshes do not nest: {0}")]
    NonNesting(String),

    #[error("error_harness: resource budget exceeded: {0}")]
    Budget(String),
}

impl Error {
    pub(crate) fn invalid(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            module,
            msg: msg.into(),
        }
    }

    /// True for failures of an otherwise well-posed computation, as opposed
    /// to rejected input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Nonconvergence { .. }
                | Error::LinearSolver(_)
                | Error::NonFinite { .. }
                | Error::StepRestriction { .. }
        )
    }
}
