use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// One or more configuration invariants failed. Every violation is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("step control violated: {0}")]
    StepControl(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0}")]
    Analysis(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse { .. } => 2,
            Error::StepControl(_) | Error::NonFinite(_) | Error::Analysis(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
