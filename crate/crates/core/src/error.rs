use thiserror::Error;

/// Failure modes surfaced by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid velocity: |v| = {speed} (must be < 1)")]
    InvalidVelocity { speed: f64 },

    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("non-realizable {what}: gamma = {gamma:e} (scale {scale:e})")]
    NonRealizable {
        what: &'static str,
        gamma: f64,
        scale: f64,
    },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Displays the whole chain itself, so it reports no separate source.
    #[error("{cause} at {location}")]
    At { location: String, cause: Box<Error> },

    #[error("configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Wraps the error with a human-readable location such as an element or stage.
    pub fn at(self, location: impl Into<String>) -> Self {
        Error::At {
            location: location.into(),
            cause: Box::new(self),
        }
    }

    /// Short machine-readable tag of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidVelocity { .. } => "invalid-velocity",
            Error::Domain { .. } => "domain",
            Error::NonRealizable { .. } => "non-realizable",
            Error::NonConvergence { .. } => "non-convergence",
            Error::At { cause, .. } => cause.kind(),
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
