use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::SegmentIntent;
use crate::protocol::{MetaCommand, TelemetrySample};
use crate::recipe::{Movement, Recipe};
use crate::registry::Registry;

/// Segment boundary tag; offsets are relative to the recording origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTag {
    pub index: usize,
    pub mode: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub movement: Movement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

impl SegmentTag {
    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }

    pub fn contains(&self, t_ms: u64) -> bool {
        self.start_ms <= t_ms && t_ms < self.end_ms
    }
}

/// In-memory session recording. All timestamps are rebased so the
/// recording starts at 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recording {
    /// Session time of offset 0.
    pub origin_ms: u64,
    pub commands: Vec<MetaCommand>,
    pub reference: Vec<TelemetrySample>,
    pub executed: Vec<TelemetrySample>,
    pub segments: Vec<SegmentTag>,
    pub joints_dim: Option<usize>,
}

impl Recording {
    pub fn new(origin_ms: u64) -> Self {
        Self { origin_ms, ..Self::default() }
    }

    pub fn push_command(&mut self, cmd: &MetaCommand) {
        let mut c = cmd.clone();
        c.timestamp_ms = cmd.timestamp_ms.saturating_sub(self.origin_ms);
        self.commands.push(c);
    }

    fn rebase(&self, sample: &TelemetrySample) -> TelemetrySample {
        let mut s = sample.clone();
        s.timestamp_ms = sample.timestamp_ms - self.origin_ms;
        s
    }

    /// Appends a sample pair if it falls inside `[origin, end)`.
    pub fn push_telemetry(&mut self, reference: &TelemetrySample, executed: &TelemetrySample, end_ms: Option<u64>) -> bool {
        let t = reference.timestamp_ms;
        if t < self.origin_ms || end_ms.is_some_and(|e| t >= e) {
            return false;
        }
        self.joints_dim.get_or_insert(reference.joints.len());
        self.reference.push(self.rebase(reference));
        self.executed.push(self.rebase(executed));
        true
    }

    /// Drops anything at or past `end_offset_ms`.
    pub fn truncate_to(&mut self, end_offset_ms: u64) {
        self.commands.retain(|c| c.timestamp_ms < end_offset_ms);
        self.reference.retain(|s| s.timestamp_ms < end_offset_ms);
        self.executed.retain(|s| s.timestamp_ms < end_offset_ms);
    }

    pub fn duration_ms(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.end_ms)
    }

    /// Segment intents recovered from the tags and the effective command
    /// stream: mode and movement from the tag, speed as the modal effective
    /// speed of the segment's commands, duration from the tag span.
    pub fn intents(&self, registry: &Registry) -> Vec<SegmentIntent> {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, tag)| {
                let in_seg: Vec<&MetaCommand> = self.commands.iter().filter(|c| tag.contains(c.timestamp_ms)).collect();
                let speed = modal_speed(in_seg.iter().copied())
                    .or_else(|| {
                        // A segment shorter than one command period gets no tick of
                        // its own; it inherits the command in force at its start.
                        let prev = self.commands.iter().rev().find(|c| c.timestamp_ms < tag.start_ms);
                        prev.filter(|c| c.mode_index == tag.mode).map(|c| c.speed)
                    })
                    .unwrap_or_else(|| registry.get(tag.mode).map_or(0.0, |m| m.default_speed));
                SegmentIntent {
                    index: i,
                    mode_index: tag.mode,
                    movement: tag.movement,
                    turn_deg: tag.turn_deg,
                    speed,
                    duration_s: tag.duration_s(),
                    height: tag.height,
                }
            })
            .collect()
    }
}

/// Most frequent speed value; ties go to the earliest occurrence.
pub fn modal_speed<'a>(commands: impl IntoIterator<Item = &'a MetaCommand>) -> Option<f64> {
    let mut counts: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for (i, c) in commands.into_iter().enumerate() {
        counts.entry(c.speed.to_bits()).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(bits, _)| f64::from_bits(bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    Recipe,
    Keyboard,
}

/// A finalized recording together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FinishedSession {
    pub kind: SessionKind,
    pub recipe: Option<Recipe>,
    pub recording: Recording,
    /// Out-of-order telemetry dropped while this recording was active.
    pub dropped: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    fn cmd(t: u64, speed: f64) -> MetaCommand {
        MetaCommand {
            timestamp_ms: t,
            mode_index: 2,
            movement_dir: Vec2::new(1.0, 0.0),
            facing_dir: Vec2::new(1.0, 0.0),
            speed,
            pelvis_height: 0.78,
        }
    }

    #[test]
    fn modal_speed_majority_and_ties() {
        let cs = [cmd(0, 2.0), cmd(50, 3.0), cmd(100, 3.0)];
        assert_eq!(modal_speed(&cs), Some(3.0));
        let tie = [cmd(0, 2.0), cmd(50, 3.0)];
        assert_eq!(modal_speed(&tie), Some(2.0));
        assert_eq!(modal_speed(&[]), None);
    }
}
