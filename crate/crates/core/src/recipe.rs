//! Multi-segment trajectory programs ("recipes").

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::SplitMix64;
use crate::registry::{ModeSpec, Registry};

/// Segment movement as chosen in the editor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Forward,
    Backward,
    StrafeLeft,
    StrafeRight,
    TurnLeft,
    TurnRight,
    None,
}

impl Movement {
    pub const ALL: [Movement; 7] = [
        Movement::Forward,
        Movement::Backward,
        Movement::StrafeLeft,
        Movement::StrafeRight,
        Movement::TurnLeft,
        Movement::TurnRight,
        Movement::None,
    ];

    /// Body-frame direction (x forward, y left); zero for turns and `None`.
    pub fn body_dir(self) -> crate::geom::Vec2 {
        use crate::geom::Vec2;
        match self {
            Movement::Forward => Vec2::new(1.0, 0.0),
            Movement::Backward => Vec2::new(-1.0, 0.0),
            Movement::StrafeLeft => Vec2::new(0.0, 1.0),
            Movement::StrafeRight => Vec2::new(0.0, -1.0),
            Movement::TurnLeft | Movement::TurnRight | Movement::None => Vec2::ZERO,
        }
    }

    pub fn is_turn(self) -> bool {
        matches!(self, Movement::TurnLeft | Movement::TurnRight)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Movement::Forward => "forward",
            Movement::Backward => "backward",
            Movement::StrafeLeft => "strafe_left",
            Movement::StrafeRight => "strafe_right",
            Movement::TurnLeft => "turn_left",
            Movement::TurnRight => "turn_right",
            Movement::None => "none",
        }
    }
}

/// A mode given either by registry index or by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeRef {
    Index(usize),
    Name(String),
}

impl ModeRef {
    pub fn resolve<'r>(&self, registry: &'r Registry) -> Option<&'r ModeSpec> {
        match self {
            ModeRef::Index(i) => registry.get(*i).ok(),
            ModeRef::Name(n) => registry.by_name(n),
        }
    }
}

impl From<usize> for ModeRef {
    fn from(i: usize) -> Self {
        ModeRef::Index(i)
    }
}

impl From<&str> for ModeRef {
    fn from(s: &str) -> Self {
        ModeRef::Name(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub mode: ModeRef,
    pub duration_s: f64,
    #[serde(default = "default_movement")]
    pub movement: Movement,
    /// Signed turn in degrees, positive counter-clockwise (left). For
    /// `turn_left`/`turn_right` only the magnitude is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

fn default_movement() -> Movement {
    Movement::None
}

impl SegmentSpec {
    pub fn new(mode: impl Into<ModeRef>, duration_s: f64, movement: Movement) -> Self {
        Self {
            mode: mode.into(),
            duration_s,
            movement,
            turn_deg: None,
            speed: None,
            height: None,
        }
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = Some(speed);
        self
    }

    pub fn with_turn(mut self, deg: f64) -> Self {
        self.turn_deg = Some(deg);
        self
    }

    pub fn with_height(mut self, height: f64) -> Self {
        self.height = Some(height);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecipeError {
    #[error("recipe has no segments")]
    Empty,
    #[error("segment {index}: {field}: {reason}")]
    InvalidSegment {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("cannot parse recipe: {0}")]
    Parse(String),
}

/// Shortest segment accepted; shorter spans round to zero milliseconds.
pub const MIN_SEGMENT_S: f64 = 0.001;

impl Recipe {
    pub fn from_json(text: &str) -> Result<Self, RecipeError> {
        serde_json::from_str(text).map_err(|e| RecipeError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe serialization")
    }

    /// Checks every segment against the registry's capability flags and ranges.
    pub fn validate(&self, registry: &Registry) -> Result<(), RecipeError> {
        if self.segments.is_empty() {
            return Err(RecipeError::Empty);
        }
        for (index, seg) in self.segments.iter().enumerate() {
            let err = |field: &'static str, reason: String| RecipeError::InvalidSegment { index, field, reason };
            let mode = seg
                .mode
                .resolve(registry)
                .ok_or_else(|| err("mode", format!("unknown mode {:?}", seg.mode)))?;
            if !seg.duration_s.is_finite() || seg.duration_s < MIN_SEGMENT_S {
                return Err(err("duration_s", format!("{} must be > 0", seg.duration_s)));
            }
            if seg.movement != Movement::None && !mode.supports_heading {
                return Err(err(
                    "movement",
                    format!("{} cannot move or turn (no heading support)", mode.name),
                ));
            }
            if let Some(t) = seg.turn_deg {
                if !t.is_finite() {
                    return Err(err("turn_deg", "must be finite".into()));
                }
                if !mode.supports_heading {
                    return Err(err("turn_deg", format!("{} has no heading support", mode.name)));
                }
            }
            if let Some(s) = seg.speed {
                match mode.speed_range {
                    Some(r) if r.contains(s) => {}
                    Some(r) => {
                        return Err(err("speed", format!("{s} outside [{}, {}]", r.min, r.max)));
                    }
                    None => return Err(err("speed", format!("{} has no speed support", mode.name))),
                }
            }
            if let Some(h) = seg.height {
                match mode.height_range {
                    Some(r) if r.contains(h) => {}
                    Some(r) => {
                        return Err(err("height", format!("{h} outside [{}, {}]", r.min, r.max)));
                    }
                    None => return Err(err("height", format!("{} has no height support", mode.name))),
                }
            }
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// A random valid recipe of 1 to `max_segments` segments, each 0.1 to
    /// 4.0 s at 10 ms resolution, using every optional field some of the time.
    pub fn random(registry: &Registry, seed: u64, max_segments: usize) -> Recipe {
        let mut rng = SplitMix64::new(seed);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let pick = |n: usize, u: f64| ((u * n as f64) as usize).min(n - 1);
        let n = 1 + pick(max_segments.max(1), unit());
        let segments = (0..n)
            .map(|_| {
                let mode = &registry.modes()[pick(registry.len(), unit())];
                let duration_s = (10 + pick(391, unit())) as f64 / 100.0;
                let movement = if mode.supports_heading { Movement::ALL[pick(Movement::ALL.len(), unit())] } else { Movement::None };
                let mut seg = SegmentSpec::new(mode.index, duration_s, movement);
                if mode.supports_heading && unit() < 0.3 {
                    seg.turn_deg = Some(((unit() * 720.0 - 360.0) * 10.0).round() / 10.0);
                }
                if let Some(r) = mode.speed_range.filter(|_| mode.supports_speed && unit() < 0.6) {
                    seg.speed = Some(r.clamp(r.min + (r.max - r.min) * (unit() * 100.0).round() / 100.0));
                }
                if let Some(r) = mode.height_range.filter(|_| mode.supports_height && unit() < 0.5) {
                    seg.height = Some(r.clamp(r.min + (r.max - r.min) * (unit() * 100.0).round() / 100.0));
                }
                seg
            })
            .collect();
        Recipe { name: format!("random-{seed}"), seed, segments }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> Registry {
        Registry::builtin()
    }

    #[test]
    fn random_recipes_validate() {
        let r = reg();
        for seed in 0..500 {
            let recipe = Recipe::random(&r, seed, 5);
            recipe.validate(&r).unwrap();
            assert!((1..=5).contains(&recipe.segments.len()));
            assert_eq!(recipe, Recipe::random(&r, seed, 5));
        }
    }

    #[test]
    fn parses_names_and_indices() {
        let r = Recipe::from_json(
            r#"{"name":"demo","seed":7,"segments":[
                {"mode":"Walk","duration_s":2.0,"movement":"forward"},
                {"mode":2,"duration_s":1.5,"movement":"forward","speed":2.5},
                {"mode":"hand_crawl","duration_s":3.0,"movement":"turn_left","turn_deg":45}
            ]}"#,
        )
        .unwrap();
        assert_eq!(r.segments.len(), 3);
        r.validate(&reg()).unwrap();
    }

    #[test]
    fn zero_duration_is_invalid() {
        let r = Recipe { name: "x".into(), seed: 0, segments: vec![SegmentSpec::new("Walk", 0.0, Movement::Forward)] };
        assert!(matches!(
            r.validate(&reg()),
            Err(RecipeError::InvalidSegment { index: 0, field: "duration_s", .. })
        ));
    }

    #[test]
    fn override_ranges_enforced() {
        let bad_speed = Recipe {
            name: "x".into(),
            seed: 0,
            segments: vec![
                SegmentSpec::new("Walk", 1.0, Movement::Forward),
                SegmentSpec::new("Run", 1.0, Movement::Forward).with_speed(3.5),
            ],
        };
        assert!(matches!(
            bad_speed.validate(&reg()),
            Err(RecipeError::InvalidSegment { index: 1, field: "speed", .. })
        ));
        let walk_speed = Recipe { segments: vec![SegmentSpec::new("Walk", 1.0, Movement::Forward).with_speed(1.0)], ..bad_speed.clone() };
        assert!(walk_speed.validate(&reg()).is_err());
        let squat_turn = Recipe { segments: vec![SegmentSpec::new("Squat", 1.0, Movement::None).with_turn(30.0)], ..bad_speed.clone() };
        assert!(matches!(
            squat_turn.validate(&reg()),
            Err(RecipeError::InvalidSegment { field: "turn_deg", .. })
        ));
        let squat_height = Recipe { segments: vec![SegmentSpec::new("Squat", 1.0, Movement::None).with_height(0.5)], ..bad_speed };
        squat_height.validate(&reg()).unwrap();
    }

    #[test]
    fn empty_recipe() {
        let r = Recipe { name: "x".into(), seed: 0, segments: vec![] };
        assert_eq!(r.validate(&reg()), Err(RecipeError::Empty));
    }
}
