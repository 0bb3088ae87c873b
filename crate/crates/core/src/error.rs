use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the numerical and index-checking layers.
///
/// Variants split into two families: precondition/validation failures, which
/// the CLI reports with exit status 2, and solver failures (exit status 3).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("grid needs at least 2 interior nodes, got {0}")]
    TooFewNodes(usize),

    #[error("spatial dimension {0} is not supported (only d = 1)")]
    UnsupportedDimension(usize),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient must be strictly positive, minimum is {min}")]
    NonPositiveCoefficient { min: f64 },

    #[error("parameter violates domain constraint: min value {min} < lower bound {lower}")]
    DomainViolation { min: f64, lower: f64 },

    #[error("singular tridiagonal system at dt = {dt}: pivot {min_pivot} at row {row}")]
    SingularSystem { dt: f64, min_pivot: f64, row: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("transformed state lost positivity at frame {frame}: min U = {min_value:e}")]
    PositivityLost { frame: usize, min_value: f64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("sampling exhausted after {0} attempts")]
    SamplingExhausted(usize),

    #[error("malformed index query: {0}")]
    MalformedQuery(String),

    #[error("undefined extended-rational operation: {0}")]
    UndefinedArithmetic(&'static str),
}

impl Error {
    /// True for errors caused by invalid inputs rather than a failing solve.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::TooFewNodes(_)
            | Error::UnsupportedDimension(_)
            | Error::ShapeMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::NonPositiveCoefficient { .. }
            | Error::DomainViolation { .. }
            | Error::MalformedQuery(_)
            | Error::UndefinedArithmetic(_) => true,
            Error::StepFailed { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::StepFailed {
            step,
            source: Box::new(self),
        }
    }
}
