use std::io;

use thiserror::Error;

/// Everything that can go wrong between reading a corpus and writing a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        /// 1-based data row (the header is row 0).
        row: usize,
        column: String,
        message: String,
    },

    #[error("row {row}: unknown API `{name}` (not present in the descriptor table)")]
    UnknownApi { row: usize, name: String },

    #[error("unknown {category} excipient `{name}` (not in the codec vocabulary)")]
    UnknownExcipient { category: String, name: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    Divergence { epoch: usize },

    #[error("codec mismatch: {0}")]
    Codec(String),

    #[error("malformed {kind} file, line {line}: {message}")]
    Format {
        kind: &'static str,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for the command-line tool: 1 for usage and
    /// configuration problems, 2 for invalid data, 3 for divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn parse(row: usize, column: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn format(kind: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            line,
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(
            Error::Io(io::Error::new(io::ErrorKind::NotFound, "x")).exit_code(),
            1
        );
        assert_eq!(Error::parse(1, "api_dose_mg", "bad").exit_code(), 2);
        assert_eq!(Error::EmptyInput("test set").exit_code(), 2);
        assert_eq!(Error::Codec("x".into()).exit_code(), 2);
        assert_eq!(Error::Divergence { epoch: 4 }.exit_code(), 3);
    }
}
