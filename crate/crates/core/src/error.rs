use thiserror::Error;

/// Errors raised by mesh construction, assembly, linear solves and time integration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative effective permeability c + r = {value:e} on cell {cell}")]
    NegativePermeability { cell: usize, value: f64 },

    #[error("conductance block entry {value:e} on cell {cell} is not positive")]
    IndefiniteBlock { cell: usize, value: f64 },

    #[error("singular diagonal block at cell {cell}")]
    SingularBlock { cell: usize },

    #[error("incompatible source for pure-Neumann problem: imbalance {imbalance:e}")]
    IncompatibleSource { imbalance: f64 },

    #[error(
        "krylov solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    KrylovDiverged { iterations: usize, residual: f64 },

    #[error("krylov breakdown at iteration {iterations}")]
    KrylovBreakdown { iterations: usize },

    #[error("preconditioner setup failed: {0}")]
    Preconditioner(String),

    #[error("newton failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("time step {dt:e} fell below minimum {dt_min:e} at t = {t}")]
    TimeStepUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown test case {0:?}")]
    UnknownTestCase(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
