//! The GHZ experiment over local TCP: one coordinator, three node processes.
//!
//! Nodes see the schedule and each MEASURE record, nothing else. The
//! coordinator draws every measurement time, so a session reproduces the
//! in-process trial list exactly for the same seed.

pub mod coordinator;
pub mod node;
pub mod transcript;
pub mod wire;

use std::io;

use thiserror::Error;

use crate::ghz::GhzError;

pub use coordinator::{coordinator_run, CoordinatorConfig, Session, SessionStatus, VoidTrial};
pub use node::{serve, serve_connection, NodeSummary};
pub use transcript::{format_session_log, verify_transcript, Mismatch, Party, Transcript, VerifyReport};
pub use wire::{read_message, write_message, Message, WireError};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Ghz(#[from] GhzError),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("disconnected: {0}")]
    Disconnected(String),
    #[error("transcript line {line}: {detail}")]
    Transcript { line: usize, detail: String },
}
