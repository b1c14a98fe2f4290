use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants map onto the process exit codes used by the command-line
/// front end: invalid input and configuration problems are exit 1,
/// non-convergence is exit 2 and I/O failures are exit 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical argument is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration file or block failed to parse or validate.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver finished without meeting its convergence test.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
