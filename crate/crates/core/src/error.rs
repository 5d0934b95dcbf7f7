//! Error type shared by every pipeline stage.

use std::path::PathBuf;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// Header/schema disagreement; `detail` names the offending columns.
    #[error("schema mismatch in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    /// A single cell failed validation during ingestion.
    #[error("{path}: data row {row}, column {column}: {detail}")]
    Cell {
        path: PathBuf,
        row: usize,
        column: String,
        detail: String,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Catch-all for precondition violations (empty inputs, bad fractions, ...).
    #[error("{0}")]
    Invalid(String),

    #[error("metric undefined on single-class input")]
    SingleClass,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by bad user input (files, schemas, config values)
    /// rather than internal failures; the command-line front end maps these to
    /// a distinct exit status.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Csv { .. } | Error::Schema { .. } | Error::Cell { .. }
        )
    }
}
