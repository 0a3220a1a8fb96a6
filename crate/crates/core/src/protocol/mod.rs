//! Messages exchanged between the frontend, the bridge and a planner backend.
//!
//! # Wire format
//!
//! The command and telemetry channels carry newline-delimited JSON records,
//! one record per line, UTF-8, with fields in a fixed order:
//!
//! ```text
//! command:   {"t":0,"mode":1,"move":[1.0,0.0],"face":[1.0,0.0],"speed":1.0,"height":0.78}
//! telemetry: {"t":0,"mode":1,"pos":[0.0,0.0,0.78],"heading":0.0,"vel":[0.0,0.0],"h":0.78,"phase":0.0,"joints":[]}
//! ```
//!
//! Floats use the shortest decimal representation that parses back to the
//! same bits, so encoding is canonical and decoding is lossless.
//!
//! The frontend channel carries [`UiEvent`] and [`BridgeRecord`] values as
//! WebSocket text frames, discriminated by a `type` field.

mod frame;
mod frontend;
mod wire;

pub use frame::FrameSplitter;
pub use frontend::{
    decode_bridge_record, decode_ui_event, encode_bridge_record, encode_ui_event, BridgeRecord,
    Key, ModeSummary, RecipeStatusRecord, RecipeStatusState, StateRecord, UiEvent,
};
pub use wire::{
    decode_command, decode_telemetry, encode_command, encode_telemetry, MetaCommand,
    TelemetrySample,
};

use thiserror::Error;

/// Tolerance on unit-vector norms.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid telemetry sample: {0}")]
    InvalidSample(String),
}
