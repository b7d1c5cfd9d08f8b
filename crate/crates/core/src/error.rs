//! Error type shared by every module of the crate.

use std::io;

use thiserror::Error;

use crate::cpc::CpcSymbol;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CPC symbol {raw:?}: {reason}")]
    MalformedSymbol { raw: String, reason: &'static str },

    #[error("scheme lists symbol {0} more than once")]
    DuplicateSymbol(CpcSymbol),

    /// Bad header or otherwise unusable table layout. Aborts ingestion.
    #[error("schema error in {source_name}: {message}")]
    Schema { source_name: String, message: String },

    #[error("family {family_id} has no forward-citation count; run the citation step first")]
    MissingIndicator { family_id: u64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {required} usable points for a fit, got {usable}")]
    InsufficientPoints { usable: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Serialized store could not be read back.
    #[error("store format error: {0}")]
    Format(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            source_name: source_name.into(),
            message: message.into(),
        }
    }
}
