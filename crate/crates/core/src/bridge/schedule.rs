use crate::geom::Vec2;
use crate::protocol::MetaCommand;
use crate::recipe::{Movement, Recipe, RecipeError};
use crate::registry::Registry;

use super::COMMAND_PERIOD_MS;

/// A recipe resolved against the registry and laid out on the session clock.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeSchedule {
    pub segments: Vec<ScheduledSegment>,
    pub total_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledSegment {
    pub index: usize,
    pub mode: usize,
    pub movement: Movement,
    /// Offsets from recipe start, `[start_ms, end_ms)`.
    pub start_ms: u64,
    pub end_ms: u64,
    /// Requested (pre-clamp) speed: the override or the mode default.
    pub speed: f64,
    pub height: f64,
    /// Signed total turn over the segment, radians (positive = left).
    pub turn_rad: f64,
    /// World facing angle at segment start.
    pub base_heading_rad: f64,
    /// Turn as it will be annotated, degrees.
    pub turn_deg: Option<f64>,
    pub height_override: Option<f64>,
}

impl RecipeSchedule {
    /// Lays out `recipe` starting from world heading `start_heading_rad`.
    /// Turn segments without an explicit angle rotate at `yaw_rate` rad/s.
    pub fn compile(
        recipe: &Recipe,
        registry: &Registry,
        yaw_rate: f64,
        start_heading_rad: f64,
    ) -> Result<Self, RecipeError> {
        recipe.validate(registry)?;
        let mut segments = Vec::with_capacity(recipe.segments.len());
        let mut elapsed_s = 0.0;
        let mut heading = start_heading_rad;
        for (index, seg) in recipe.segments.iter().enumerate() {
            let mode = seg.mode.resolve(registry).expect("validated");
            let start_ms = (elapsed_s * 1000.0_f64).round() as u64;
            elapsed_s += seg.duration_s;
            let end_ms = (elapsed_s * 1000.0_f64).round() as u64;
            if end_ms <= start_ms {
                return Err(RecipeError::InvalidSegment {
                    index,
                    field: "duration_s",
                    reason: "rounds to an empty span".into(),
                });
            }
            let turn_rad = match seg.movement {
                Movement::TurnLeft => seg.turn_deg.map_or(yaw_rate * seg.duration_s, |d| d.abs().to_radians()),
                Movement::TurnRight => -seg.turn_deg.map_or(yaw_rate * seg.duration_s, |d| d.abs().to_radians()),
                _ => seg.turn_deg.unwrap_or(0.0).to_radians(),
            };
            let turn_deg = if seg.movement.is_turn() || seg.turn_deg.is_some() {
                Some(turn_rad.to_degrees())
            } else {
                None
            };
            segments.push(ScheduledSegment {
                index,
                mode: mode.index,
                movement: seg.movement,
                start_ms,
                end_ms,
                speed: seg.speed.unwrap_or(mode.default_speed),
                height: seg.height.unwrap_or(mode.default_height),
                turn_rad,
                base_heading_rad: heading,
                turn_deg,
                height_override: seg.height,
            });
            heading += turn_rad;
        }
        let total_ms = segments.last().map_or(0, |s| s.end_ms);
        Ok(Self { segments, total_ms })
    }

    pub fn segment_at(&self, offset_ms: u64) -> Option<&ScheduledSegment> {
        let i = self.segments.partition_point(|s| s.end_ms <= offset_ms);
        self.segments.get(i).filter(|s| s.start_ms <= offset_ms)
    }

    /// World facing angle after the last segment.
    pub fn final_heading_rad(&self) -> f64 {
        self.segments
            .last()
            .map_or(0.0, |s| s.base_heading_rad + s.turn_rad)
    }

    /// Unclamped command for `offset_ms` into the recipe.
    ///
    /// The facing target advances uniformly through the segment's turn and
    /// reaches the full angle at the segment's last command tick.
    pub fn command_at(&self, offset_ms: u64, timestamp_ms: u64) -> Option<(usize, MetaCommand)> {
        let seg = self.segment_at(offset_ms)?;
        let span = (seg.end_ms - seg.start_ms) as f64;
        let frac = (((offset_ms - seg.start_ms) + COMMAND_PERIOD_MS) as f64 / span).min(1.0);
        let facing = Vec2::from_angle(seg.base_heading_rad + seg.turn_rad * frac);
        Some((
            seg.index,
            MetaCommand {
                timestamp_ms,
                mode_index: seg.mode,
                movement_dir: seg.movement.body_dir(),
                facing_dir: facing,
                speed: seg.speed,
                pelvis_height: seg.height,
            },
        ))
    }
}
