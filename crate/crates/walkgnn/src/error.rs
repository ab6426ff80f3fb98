//! Crate-wide error type.

/// Errors raised across the crate.
///
/// The variants mirror the failure classes of the public API: `Input` for
/// bad caller-supplied values, `Constraint` for violated domain invariants
/// (e.g. a disconnected node set where a connected one is required),
/// `Contract` for programming errors at module boundaries (shape mismatches,
/// infeasible actions), and `Parse` for dataset files with file and line
/// context.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("parse error in {file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: msg.into(),
        }
    }
}
