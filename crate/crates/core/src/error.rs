use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FrwkvError>;

#[derive(Debug, Error)]
pub enum FrwkvError {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {stage} at step {step}")]
    NonFinite { stage: String, step: usize },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FrwkvError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        FrwkvError::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FrwkvError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FrwkvError::Io {
            path: path.into(),
            source,
        }
    }
}
