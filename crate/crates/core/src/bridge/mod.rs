//! Session orchestration: UI events to a 20 Hz effective command stream,
//! recipe execution, and telemetry recording.
//!
//! Everything here is synchronous and clock-agnostic. Callers feed session
//! time explicitly, which lets the same [`Session`] run against the wall
//! clock in the interactive service and against a virtual clock in batch
//! generation and tests.

mod recording;
mod runner;
mod schedule;
mod session;

pub use recording::{modal_speed, FinishedSession, Recording, SegmentTag, SessionKind};
pub use runner::{execute_recipe, run_recipe, Backend, ReferenceBackend, TelemetryPair, WireLoopback};
pub use schedule::{RecipeSchedule, ScheduledSegment};
pub use session::{Session, SessionState, SessionStatus};

use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::recipe::RecipeError;
use crate::registry::UnknownMode;

/// Command stream period (20 Hz).
pub const COMMAND_PERIOD_MS: u64 = 50;
/// Telemetry period (50 Hz).
pub const TELEMETRY_PERIOD_MS: u64 = 20;
/// Heading snap quantum for Q/E, degrees.
pub const SNAP_DEG: f64 = 30.0;
/// How long a finishing recording waits for late telemetry.
pub const FINISH_GRACE_MS: u64 = 500;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("event ignored while a recipe is running")]
    IgnoredDuringRecipe,
    #[error("cannot start a recipe while {0}")]
    Busy(&'static str),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(#[from] RecipeError),
    #[error(transparent)]
    UnknownMode(#[from] UnknownMode),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
