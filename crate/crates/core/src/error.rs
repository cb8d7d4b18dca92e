use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A function or derivative produced a non-finite value.
    #[error("evaluation domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("singular step matrix for dt = {dt}, dx = {dx}")]
    SingularStep { dt: f64, dx: f64 },

    #[error("linear solve residual {residual:e} exceeds solver tolerance {tol:e}")]
    SolverTolerance { residual: f64, tol: f64 },

    #[error("non-finite state produced")]
    Divergence,

    #[error("step {index} failed: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
