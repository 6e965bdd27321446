use thiserror::Error;

/// Errors raised by the schemes, solvers and experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error at index {index}: {what} (value {value})")]
    Domain {
        index: usize,
        value: f64,
        what: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("explicit step unstable at node {index}: value {value} left [0, {upper}]")]
    Stability { index: usize, value: f64, upper: f64 },

    #[error("newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        iterate: Vec<f64>,
    },

    #[error("monotone iteration did not close the bracket after {steps} pseudo-steps (gap {gap:e})")]
    MonotoneBudget { steps: usize, gap: f64 },

    #[error("step {step} at t = {t}: {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("singular tridiagonal system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("grid mismatch: expected {expected} nodes, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps a solver failure with the index and time of the step that produced it.
    pub fn at_step(self, step: usize, t: f64) -> Self {
        Error::Step {
            step,
            t,
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
