use thiserror::Error;

/// Errors produced by the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Raised when epsilon vanishes; the kinetic operators are undefined and
    /// the caller should switch to a diffusion solver.
    #[error("stiff limit reached: {0}")]
    StiffLimit(String),

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("indefinite operator: curvature {curvature:e} at iteration {iteration}")]
    Indefinite { curvature: f64, iteration: usize },

    #[error("dense assembly needs {rows} rows, which exceeds the cap of {cap}")]
    DenseCapExceeded { rows: usize, cap: usize },

    #[error("CFL violation: dt = {dt:e} exceeds the admissible {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("second-order stepping needs a previous level: {0}")]
    BootstrapRequired(String),

    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }

    /// Strips `Step` wrappers and returns the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
