use std::path::PathBuf;

use thiserror::Error;

use crate::providers::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while loading or validating a corpus file.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate doc_id {doc_id:?}")]
    DuplicateDocId { doc_id: String, line: usize },
    #[error("line {line}: document {doc_id:?} has non-positive page_number {page_number}")]
    NonPositivePage {
        doc_id: String,
        line: usize,
        page_number: i64,
    },
    #[error("line {line}: document {doc_id:?} repeats page_number {page_number}")]
    DuplicatePage {
        doc_id: String,
        line: usize,
        page_number: u32,
    },
    #[error("document {0:?} has no pages")]
    EmptyDocument(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("embedding window {window}: {source}")]
    EmbedWindow {
        window: usize,
        #[source]
        source: ProviderError,
    },
    #[error("document {doc_id:?}: {source}")]
    InDocument {
        doc_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("run budget of {budget_secs}s exceeded after {completed} item(s)")]
    BudgetExceeded { budget_secs: f64, completed: usize },
}

impl Error {
    /// True when the root cause is a model-provider failure.
    pub fn is_provider_failure(&self) -> bool {
        match self {
            Error::Provider(_) | Error::EmbedWindow { .. } => true,
            Error::InDocument { source, .. } => source.is_provider_failure(),
            _ => false,
        }
    }

    pub fn in_document(doc_id: &str, source: Error) -> Self {
        Error::InDocument {
            doc_id: doc_id.to_owned(),
            source: Box::new(source),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
