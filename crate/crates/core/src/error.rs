use alloc::string::String;

use crate::features::ObjectId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },
    #[error("invalid object {id}: {reason}")]
    InvalidObject { id: ObjectId, reason: String },
    #[error("arena construction failed: {0}")]
    Construction(String),
    #[error("station index {index} out of range (arena has {count} stations)")]
    StationOutOfRange { index: usize, count: usize },
    #[error("no distinguishing expression exists for object {0}")]
    NoDistinguishingExpression(ObjectId),
    #[error("unknown lexeme {0:?}")]
    UnknownLexeme(String),
    #[error("corrupt ledger at event {index}: {reason}")]
    CorruptLedger { index: u64, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
