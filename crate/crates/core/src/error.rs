use thiserror::Error;

/// Errors raised by the bound and sampling routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Reading or writing a file failed.
    #[error("I/O error: {0}")]
    Io(String),

    /// A Monte-Carlo estimate needed by the operation is too poorly resolved.
    #[error(
        "precision error in {what}: estimate {estimate:e} with CI [{ci_low:e}, {ci_high:e}] \
         has effective sample size {ess:.1} (floor {floor})"
    )]
    Precision {
        what: String,
        estimate: f64,
        ci_low: f64,
        ci_high: f64,
        ess: f64,
        floor: f64,
    },
}

impl Error {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::Precision { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
