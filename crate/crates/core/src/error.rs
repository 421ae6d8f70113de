use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("axis {axis}: node count {n} must be even and at least 8")]
    InvalidNodeCount { axis: usize, n: usize },

    #[error("axis {axis}: degenerate interval [{a}, {b})")]
    DegenerateInterval { axis: usize, a: f64, b: f64 },

    #[error("unsupported dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("axis {axis} out of range for a {dim}D grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("spectral symbol is not conjugate-symmetric at spectral index {index}")]
    NonHermitianSymbol { index: usize },

    #[error("grid with {nodes} nodes is too large for a dense materialization (limit {limit})")]
    DenseTooLarge { nodes: usize, limit: usize },

    #[error("linear stage solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("iteration diverged (non-finite values) in sweep {sweep}")]
    Diverged { sweep: usize },

    #[error("nonlinear startup stalled after {sweeps} sweeps (residual {residual:.3e})")]
    StartupFailed { sweeps: usize, residual: f64 },

    #[error("convergence rate undefined for error pair ({0:e}, {1:e})")]
    UndefinedRate(f64, f64),

    #[error("run aborted at t = {t}: {source}")]
    RunAborted {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical solvers, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::SolverNotConverged { .. } | Error::Diverged { .. } | Error::StartupFailed { .. } => true,
            Error::RunAborted { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
