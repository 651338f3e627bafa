use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::tag_protocol::TagId;

/// Errors from the attendance ledger, registry and report layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tag {0} is already bound to a student")]
    TagAlreadyBound(TagId),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("only an admin may modify stored data")]
    Forbidden,
    #[error("{0} not found")]
    NotFound(String),
    #[error("a session for course {0:?} is already open")]
    SessionAlreadyOpen(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("no pending registration for tag {0} in this session")]
    NoPendingRecord(TagId),
    #[error("audit log {path} is corrupt at line {line}: {reason}")]
    CorruptStore { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
