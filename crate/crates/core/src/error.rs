use thiserror::Error;

/// Every failure mode surfaced by the library.
///
/// The CLI maps each variant onto one of its documented exit codes via
/// [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error at {location}: {message}")]
    Validation { location: String, message: String },

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("infeasible mixing profile: {0}")]
    InfeasibleMixing(String),

    #[error("degenerate variance: Var(S_n) = {variance} is below the required {required}")]
    DegenerateVariance { variance: f64, required: f64 },

    #[error("invariant violation [{check}]: {message}")]
    Invariant { check: String, message: String },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { location: location.into(), message: message.into() }
    }

    pub(crate) fn invariant(check: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant { check: check.into(), message: message.into() }
    }

    /// Process exit code used by the command line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Validation { .. } => 2,
            Error::Invariant { .. } => 4,
            Error::Resource(_) => 5,
            _ => 3,
        }
    }
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
