//! Command/telemetry service around the assistance session.
//!
//! [`hub::Hub`] is the deterministic core: commands in, one reply plus
//! events out. [`server`] puts it behind a websocket and a small HTTP API;
//! [`record`] captures and replays event logs.

pub mod config;
pub mod hub;
pub mod protocol;
pub mod record;
pub mod server;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("event log: {0}")]
    Log(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] teleassist_core::CoreError),
}
