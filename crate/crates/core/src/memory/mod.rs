//! Memory bank engine: the persistent fact store and its CRUD state machine.
//!
//! A [`MemoryBank`] holds insertion-ordered [`MemoryEntry`] records. All
//! mutation flows through [`MemoryBank::apply`] with a validated
//! [`MemoryOperationDecision`] in `{ADD, UPDATE, DELETE, NOOP}`. Ids are
//! monotonic and never reused; timestamps are logical event indices so
//! replaying an operation log reproduces the bank bit-for-bit.

mod bank;
mod decision;
mod io;
mod oplog;
mod parse;

pub use bank::{MemoryBank, MemoryEntry, MemoryId, OperationOutcome};
pub use decision::{DecisionKind, MemoryOperationDecision, ValidationError};
pub use io::{load_bank, load_bank_path, save_bank, save_bank_path};
pub use oplog::{replay_log, LogRecord, OperationLog};
pub use parse::{parse_decisions, render_decisions};

use thiserror::Error;

/// Errors surfaced by the memory engine.
#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("invalid decision: {0}")]
    InvalidDecision(#[from] ValidationError),
    #[error("parse error at byte {offset}: {message}")]
    ParseError { offset: usize, message: String },
    #[error("schema error at byte {offset}: {message}")]
    SchemaError { offset: usize, message: String },
    #[error("corrupt bank: {0}")]
    CorruptBank(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
