use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter configuration outside the model's support: a non-positive
    /// beta shape, a latent outside (0, 1), or a variance at or above the
    /// truncation bound.
    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("simplex boundary: {0}")]
    Boundary(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("infeasible truth: {0}")]
    InfeasibleTruth(String),

    /// The component-wise posterior mean lies outside the support, so the
    /// deviance at the mean is undefined.
    #[error("deviance undefined at posterior mean: {0}")]
    UndefinedAtMean(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn support(msg: impl Into<String>) -> Self {
        Error::SupportViolation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool.
    ///
    /// 0 is success; each error class that a user can act on gets its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Boundary(_) | Error::UndefinedAtMean(_) => 1,
            Error::Parse { .. } => 2,
            Error::Schema(_) | Error::EmptyDataset(_) => 3,
            Error::SupportViolation(_) | Error::Initialization(_) | Error::InfeasibleTruth(_) => 4,
            Error::Io { .. } => 5,
        }
    }

    /// Short class name printed on standard error ahead of the message.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::SupportViolation(_) => "support-violation",
            Error::Boundary(_) => "boundary",
            Error::Initialization(_) => "initialization",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::EmptyDataset(_) => "empty-dataset",
            Error::InfeasibleTruth(_) => "infeasible-truth",
            Error::UndefinedAtMean(_) => "undefined-at-mean",
            Error::Io { .. } => "io",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let parse = Error::Parse {
            row: 1,
            column: "q1".into(),
            message: "bad".into(),
        };
        let schema = Error::Schema("missing".into());
        let support = Error::support("x");
        let io = Error::io("/nope", std::io::Error::other("x"));
        let codes = [
            parse.exit_code(),
            schema.exit_code(),
            support.exit_code(),
            io.exit_code(),
        ];
        for (i, a) in codes.iter().enumerate() {
            assert_ne!(*a, 0);
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(Error::Initialization("x".into()).exit_code(), support.exit_code());
    }
}
