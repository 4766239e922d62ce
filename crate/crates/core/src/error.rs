use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tree::TreeError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corpus {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("invalid sentence: {0}")]
    Sentence(String),
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
    #[error("{0}")]
    Annotation(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error(transparent)]
    Autodiff(#[from] rstptr_autodiff::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
