use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a structural or numerical precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A state recursion or filter sweep produced non-finite or runaway values.
    #[error("numerical divergence{}: {what}", at_time(*t))]
    Divergence { t: Option<usize>, what: String },

    #[error("covariance `{name}` is singular or not positive definite")]
    SingularCovariance { name: String },

    #[error("normal equations for block `{block}` are rank deficient beyond the ridge")]
    RankDeficient { block: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_time(t: Option<usize>) -> String {
    match t {
        Some(t) => format!(" at t={t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn divergence(t: usize, what: impl Into<String>) -> Self {
        Error::Divergence {
            t: Some(t),
            what: what.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 2,
            _ => 1,
        }
    }
}
