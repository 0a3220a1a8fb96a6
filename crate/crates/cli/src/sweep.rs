//! Parameter sweeps over recipe segment fields.
//!
//! ```text
//! spec  := axis (';' axis)*
//! axis  := selector '.' field '=' value (',' value)*
//! selector := mode name | normalized mode key | mode index | '*'
//! field := speed | height | duration_s | turn_deg
//! ```
//!
//! `Run.speed=1.5,2.0,2.5,3.0` replays a recipe once per value with every
//! Run segment's speed overridden. Several axes form a cartesian product,
//! first axis outermost.

use std::fmt;

use serde::Serialize;
use strider_core::recipe::Recipe;
use strider_core::registry::Registry;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Speed,
    Height,
    DurationS,
    TurnDeg,
}

impl Field {
    fn parse(s: &str) -> Option<Field> {
        match s {
            "speed" => Some(Field::Speed),
            "height" => Some(Field::Height),
            "duration_s" | "duration" => Some(Field::DurationS),
            "turn_deg" | "turn" => Some(Field::TurnDeg),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Speed => "speed",
            Field::Height => "height",
            Field::DurationS => "duration_s",
            Field::TurnDeg => "turn_deg",
        }
    }
}

/// Which segments an axis touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    All,
    Mode(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub selector: Selector,
    pub field: Field,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("sweep axis {0:?}: expected selector.field=v1,v2,...")]
    Syntax(String),
    #[error("sweep axis {axis:?}: unknown mode {selector:?}")]
    UnknownMode { axis: String, selector: String },
    #[error("sweep axis {axis:?}: unknown field {field:?} (speed, height, duration_s, turn_deg)")]
    UnknownField { axis: String, field: String },
    #[error("sweep axis {axis:?}: bad value {value:?}")]
    Value { axis: String, value: String },
}

/// One point of the product: `(axis label, value)` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<(String, f64)>,
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(";"))
    }
}

impl SweepSpec {
    pub fn parse(spec: &str, registry: &Registry) -> Result<SweepSpec, SweepError> {
        let mut axes = Vec::new();
        for raw in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let syntax = || SweepError::Syntax(raw.to_string());
            let (lhs, rhs) = raw.split_once('=').ok_or_else(syntax)?;
            let (sel, field) = lhs.trim().rsplit_once('.').ok_or_else(syntax)?;
            let (sel, field) = (sel.trim(), field.trim());
            let selector = if sel == "*" {
                Selector::All
            } else if let Ok(i) = sel.parse::<usize>() {
                registry.get(i).map_err(|_| SweepError::UnknownMode { axis: raw.into(), selector: sel.into() })?;
                Selector::Mode(i)
            } else {
                let m = registry
                    .by_name(sel)
                    .ok_or_else(|| SweepError::UnknownMode { axis: raw.into(), selector: sel.into() })?;
                Selector::Mode(m.index)
            };
            let field = Field::parse(field)
                .ok_or_else(|| SweepError::UnknownField { axis: raw.into(), field: field.into() })?;
            let values = rhs
                .split(',')
                .map(|v| {
                    let v = v.trim();
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| SweepError::Value { axis: raw.into(), value: v.into() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.is_empty() {
                return Err(syntax());
            }
            axes.push(Axis { label: lhs.trim().to_string(), selector, field, values });
        }
        Ok(SweepSpec { axes })
    }

    /// Every point of the product; a single empty point when there are no axes.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((axis.label.clone(), v));
                        q
                    })
                })
                .collect();
        }
        points.into_iter().enumerate().map(|(index, values)| SweepPoint { index, values }).collect()
    }

    /// Applies `point` to a copy of `recipe`. Segments named by index or
    /// name both match by resolved mode.
    pub fn apply(&self, recipe: &Recipe, point: &SweepPoint, registry: &Registry) -> Recipe {
        let mut out = recipe.clone();
        for (axis, (_, value)) in self.axes.iter().zip(&point.values) {
            for seg in &mut out.segments {
                let mode = seg.mode.resolve(registry).map(|m| m.index);
                let hit = match axis.selector {
                    Selector::All => true,
                    Selector::Mode(i) => mode == Some(i),
                };
                if !hit {
                    continue;
                }
                match axis.field {
                    Field::Speed => seg.speed = Some(*value),
                    Field::Height => seg.height = Some(*value),
                    Field::DurationS => seg.duration_s = *value,
                    Field::TurnDeg => seg.turn_deg = Some(*value),
                }
            }
        }
        out
    }
}
