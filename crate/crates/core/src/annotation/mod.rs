//! Template-based language annotation.
//!
//! Each recorded segment is rendered in eight styles (four registers, each
//! with and without a duration clause), and the whole trajectory in
//! seventeen descriptions: every style twice with independent synonym and
//! connective draws, plus one compact summary. All choices come from seeded
//! [`SplitMix64`] streams, so output is a pure function of the intents, the
//! seed and the loaded banks.

mod render;
mod rng;

pub use render::{
    compose_trajectory, render_segment, render_trajectory, tempo_adverb, third_person, turn_bucket,
    BucketSize, ComposedDescription, Side, TurnBucket,
};
pub use rng::{derive_seed, domain, Chooser, Scripted, SplitMix64};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recipe::Movement;

/// What a segment did, as fed to the templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentIntent {
    pub index: usize,
    pub mode_index: usize,
    pub movement: Movement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_deg: Option<f64>,
    /// Effective commanded speed, m/s.
    pub speed: f64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Register {
    Instruction,
    Natural,
    Narrative,
    Concise,
}

impl Register {
    pub const ALL: [Register; 4] = [Register::Instruction, Register::Natural, Register::Narrative, Register::Concise];

    pub fn as_str(self) -> &'static str {
        match self {
            Register::Instruction => "instruction",
            Register::Natural => "natural",
            Register::Narrative => "narrative",
            Register::Concise => "concise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StyleId {
    pub register: Register,
    pub with_duration: bool,
}

impl StyleId {
    /// The eight styles in output order: registers in turn, each without
    /// and then with a duration clause.
    pub const ALL: [StyleId; 8] = {
        const fn s(register: Register, with_duration: bool) -> StyleId {
            StyleId { register, with_duration }
        }
        [
            s(Register::Instruction, false),
            s(Register::Instruction, true),
            s(Register::Natural, false),
            s(Register::Natural, true),
            s(Register::Narrative, false),
            s(Register::Narrative, true),
            s(Register::Concise, false),
            s(Register::Concise, true),
        ]
    };

    pub fn position(self) -> usize {
        StyleId::ALL.iter().position(|s| *s == self).expect("all styles listed")
    }

    pub fn name(self) -> String {
        if self.with_duration {
            format!("{}_timed", self.register.as_str())
        } else {
            self.register.as_str().to_string()
        }
    }
}

/// How many full-trajectory descriptions to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryLayout {
    /// Independent draws per style.
    pub draws_per_style: usize,
    /// Append the single-line compact summary.
    pub summary: bool,
}

impl Default for TrajectoryLayout {
    fn default() -> Self {
        Self { draws_per_style: 2, summary: true }
    }
}

impl TrajectoryLayout {
    pub fn count(&self) -> usize {
        StyleId::ALL.len() * self.draws_per_style + self.summary as usize
    }
}

/// Renderings for one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub seed: u64,
    /// Style names, in the order used by every entry of `segments`.
    pub styles: Vec<String>,
    /// Per segment, one sentence per style.
    pub segments: Vec<Vec<String>>,
    pub trajectory: Vec<String>,
}

impl AnnotationSet {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("annotation serialization");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("cannot annotate an empty trajectory")]
    EmptyTrajectory,
    #[error("mode {0} has no tempo bank")]
    NoTempoBank(String),
    #[error(transparent)]
    UnknownMode(#[from] crate::registry::UnknownMode),
}
