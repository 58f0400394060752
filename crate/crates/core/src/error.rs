use std::path::PathBuf;

use crate::dictionary::TopicDictionary;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error(
        "dictionary dual ascent did not converge after {iterations} iterations (projected gradient {residual:.3e})"
    )]
    DualAscent {
        iterations: usize,
        residual: f64,
        best: Box<TopicDictionary>,
    },

    #[error("non-finite objective after updating {block} at outer iteration {iteration}")]
    NonFinite { block: &'static str, iteration: usize },

    #[error("training diverged ({0}); try a smaller learning rate")]
    Diverged(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Failures that happen while fitting a model, as opposed to bad inputs.
    pub fn is_training_failure(&self) -> bool {
        matches!(
            self,
            Error::Solver(_) | Error::DualAscent { .. } | Error::NonFinite { .. } | Error::Diverged(_)
        )
    }
}
