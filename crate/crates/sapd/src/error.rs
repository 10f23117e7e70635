use thiserror::Error;

/// Errors surfaced by solvers and numeric primitives.
#[derive(Debug, Error)]
pub enum SolverError {
    /// The backtracking loop shrank the step more than `cap` times without
    /// passing the acceptance test. Usually means the declared problem
    /// structure (convexity, smoothness) does not match the evaluators.
    #[error("backtracking exceeded {cap} trials at iteration {k}")]
    BacktrackCapExceeded { k: usize, cap: usize },

    /// The symmetric eigensolver did not converge.
    #[error("eigendecomposition of a {n}x{n} symmetric matrix did not converge")]
    EigenFailure { n: usize },

    /// The acceptance test was configured with `c_beta = 0` but the dual
    /// gradient varies with the dual variable, so the corresponding term
    /// cannot be dropped.
    #[error("step test has c_beta = 0 but the dual gradient difference is nonzero; L_yy is misdeclared")]
    BetaTermMisdeclared,

    /// A Lagrangian evaluation hit an indicator at an infeasible point.
    #[error("gap evaluation at an infeasible point: {0}")]
    InfeasibleEvaluation(String),

    /// The sampled dual-bound estimate did not stay finite.
    #[error("dual bound estimate diverged: {0}")]
    UnboundedDualEstimate(String),

    /// Invalid argument or configuration.
    #[error("{0}")]
    InvalidInput(String),
}
