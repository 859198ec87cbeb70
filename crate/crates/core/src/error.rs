use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank deficiency at input function {index} (residual norm {residual:e})")]
    RankDeficient { index: usize, residual: f64 },

    #[error("family is not orthonormal: max |G - I| = {deviation:e} exceeds {tol:e}")]
    NotOrthonormal { deviation: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} requires {required}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error(
        "solver did not converge after {iterations} iterations \
         (primal residual {primal_residual:e}, dual residual {dual_residual:e})"
    )]
    NotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("numerical rank collapse at sampling step {step} (residual {residual:e})")]
    RankCollapse { step: usize, residual: f64 },

    #[error("function violates the Hamming-Lipschitz condition: |f({a}) - f({b})| = {gap} > 1")]
    NotLipschitz { a: usize, b: usize, gap: f64 },

    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
