use serde::{Deserialize, Serialize};

use super::rng::{domain, Chooser, SplitMix64};
use super::{AnnotationError, AnnotationSet, Register, SegmentIntent, StyleId, TrajectoryLayout};
use crate::registry::{ModeSpec, Registry};

/// Tempo adverb for `speed`, by linear position within the mode's range.
///
/// With a bank of `N` adverbs the index is
/// `min(floor((speed - min) / (max - min) * N), N - 1)`; speeds outside the
/// range are clamped first.
pub fn tempo_adverb(mode: &ModeSpec, speed: f64) -> Result<&str, AnnotationError> {
    let (Some(range), Some(bank)) = (mode.speed_range, mode.tempo_bank.as_ref()) else {
        return Err(AnnotationError::NoTempoBank(mode.name.clone()));
    };
    if !mode.supports_speed || bank.is_empty() {
        return Err(AnnotationError::NoTempoBank(mode.name.clone()));
    }
    let n = bank.len();
    let s = range.clamp(speed);
    let pos = ((s - range.min) / (range.max - range.min) * n as f64).floor();
    let idx = (pos.max(0.0) as usize).min(n - 1);
    Ok(&bank[idx])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketSize {
    Slight,
    Partial,
    Quarter,
    Half,
    Full,
}

impl BucketSize {
    pub fn as_str(self) -> &'static str {
        match self {
            BucketSize::Slight => "slight",
            BucketSize::Partial => "partial",
            BucketSize::Quarter => "quarter",
            BucketSize::Half => "half",
            BucketSize::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnBucket {
    pub size: BucketSize,
    pub side: Side,
}

impl TurnBucket {
    /// e.g. `slight left`.
    pub fn label(self) -> String {
        format!("{} {}", self.size.as_str(), self.side.as_str())
    }

    /// Noun phrase used after a turn verb.
    fn phrase(self) -> String {
        let side = self.side.as_str();
        match self.size {
            BucketSize::Slight | BucketSize::Partial => format!("a {} {side} turn", self.size.as_str()),
            _ => format!("a {} turn to the {side}", self.size.as_str()),
        }
    }
}

/// Buckets a signed turn (positive = left) by magnitude with breakpoints at
/// 15°, 60°, 120° and 240°.
pub fn turn_bucket(turn_deg: f64) -> TurnBucket {
    let a = turn_deg.abs();
    let size = if a < 15.0 {
        BucketSize::Slight
    } else if a < 60.0 {
        BucketSize::Partial
    } else if a < 120.0 {
        BucketSize::Quarter
    } else if a < 240.0 {
        BucketSize::Half
    } else {
        BucketSize::Full
    };
    let side = if turn_deg < 0.0 { Side::Right } else { Side::Left };
    TurnBucket { size, side }
}

/// Conjugates the leading verb of `phrase` in the third person singular.
pub fn third_person(phrase: &str) -> String {
    let (verb, rest) = match phrase.find(' ') {
        Some(i) => phrase.split_at(i),
        None => (phrase, ""),
    };
    let b = verb.as_bytes();
    let conj = if ["s", "sh", "ch", "x", "z"].iter().any(|e| verb.ends_with(e)) || verb.ends_with('o') {
        format!("{verb}es")
    } else if b.len() >= 2 && b[b.len() - 1] == b'y' && !b"aeiou".contains(&b[b.len() - 2]) {
        format!("{}ies", &verb[..verb.len() - 1])
    } else {
        format!("{verb}s")
    };
    format!("{conj}{rest}")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Bank draws for one rendering of one segment.
struct Parts<'a> {
    verb: &'a str,
    direction: &'a str,
    manner: &'a str,
    turn_verb: &'a str,
    tempo: Option<&'a str>,
    turn: Option<TurnBucket>,
    duration_s: f64,
}

/// Draws in a fixed order (verb, direction, manner, turn verb) whatever the
/// intent, so equal seeds give aligned choices across parameter sweeps.
fn draw<'a>(registry: &'a Registry, intent: &SegmentIntent, rng: &mut dyn Chooser) -> Result<Parts<'a>, AnnotationError> {
    let mode = registry.get(intent.mode_index)?;
    let banks = registry.banks();
    let verb = &mode.verb_bank[rng.choose(mode.verb_bank.len())];
    let dirs = banks.direction_bank(intent.movement);
    let direction = &dirs[rng.choose(dirs.len())];
    let manner = &banks.manner[rng.choose(banks.manner.len())];
    let turn_verb = &banks.turn_verbs[rng.choose(banks.turn_verbs.len())];
    let tempo = if mode.supports_speed { Some(tempo_adverb(mode, intent.speed)?) } else { None };
    Ok(Parts {
        verb,
        direction,
        manner,
        turn_verb,
        tempo,
        turn: intent.turn_deg.map(turn_bucket),
        duration_s: intent.duration_s,
    })
}

/// Where a clause sits in a trajectory description.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Position {
    Lead,
    Follow,
}

fn format_parts(p: &Parts<'_>, style: StyleId, at: Position) -> String {
    let mut words: Vec<String> = Vec::with_capacity(8);
    let verb = match (style.register, at) {
        (Register::Narrative, Position::Lead) => format!("The robot {}", third_person(p.verb)),
        (Register::Narrative, Position::Follow) => format!("it {}", third_person(p.verb)),
        (Register::Concise, _) => p.verb.to_lowercase(),
        (_, Position::Lead) => capitalize(p.verb),
        (_, Position::Follow) => p.verb.to_string(),
    };
    words.push(verb);
    words.push(p.direction.to_string());
    match style.register {
        Register::Natural => words.push(p.tempo.unwrap_or(p.manner).to_string()),
        _ => words.extend(p.tempo.map(str::to_string)),
    }
    if let Some(turn) = p.turn {
        words.push(match style.register {
            Register::Concise => format!("{} turn", turn.label()),
            _ => format!("while {} {}", p.turn_verb, turn.phrase()),
        });
    }
    if style.with_duration {
        let d = p.duration_s;
        words.push(match style.register {
            Register::Natural => format!("for about {d:.1} seconds"),
            Register::Concise => format!("{d:.1}s"),
            _ => format!("for {d:.1} seconds"),
        });
    }
    words.join(" ")
}

/// Renders one segment in one style using draws from `rng`.
pub fn render_segment(
    registry: &Registry,
    intent: &SegmentIntent,
    style: StyleId,
    rng: &mut dyn Chooser,
) -> Result<String, AnnotationError> {
    let parts = draw(registry, intent, rng)?;
    Ok(format_parts(&parts, style, Position::Lead))
}

/// One full-trajectory description with its pieces exposed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedDescription {
    pub clauses: Vec<String>,
    /// `connectives[i]` joins `clauses[i]` and `clauses[i + 1]`.
    pub connectives: Vec<String>,
    pub text: String,
}

/// Variant `v` of the trajectory descriptions: `v < 8 * draws` selects a
/// style and draw; anything past that is the compact summary.
pub fn compose_trajectory(
    registry: &Registry,
    intents: &[SegmentIntent],
    seed: u64,
    layout: &TrajectoryLayout,
    variant: usize,
) -> Result<ComposedDescription, AnnotationError> {
    if intents.is_empty() {
        return Err(AnnotationError::EmptyTrajectory);
    }
    let full = StyleId::ALL.len() * layout.draws_per_style;
    let style = if variant < full {
        StyleId::ALL[variant / layout.draws_per_style]
    } else {
        StyleId { register: Register::Concise, with_duration: false }
    };
    let v = variant as u64;
    let mut clauses = Vec::with_capacity(intents.len());
    for (i, intent) in intents.iter().enumerate() {
        let mut rng = SplitMix64::stream(seed, domain::TRAJECTORY_CLAUSE, v, i as u64);
        let parts = draw(registry, intent, &mut rng)?;
        let at = if i == 0 { Position::Lead } else { Position::Follow };
        clauses.push(format_parts(&parts, style, at));
    }
    let bank = &registry.banks().connectives;
    let mut conn_rng = SplitMix64::stream(seed, domain::CONNECTIVE, v, 0);
    let connectives: Vec<String> = (1..intents.len())
        .map(|_| {
            if variant < full {
                bank[conn_rng.choose(bank.len())].clone()
            } else {
                // The summary always chains with the first connective.
                bank[0].clone()
            }
        })
        .collect();
    let mut text = clauses[0].clone();
    for (c, clause) in connectives.iter().zip(&clauses[1..]) {
        text.push_str(", ");
        text.push_str(c);
        text.push(' ');
        text.push_str(clause);
    }
    Ok(ComposedDescription { clauses, connectives, text })
}

/// Builds the full annotation set for a recording.
pub fn render_trajectory(
    registry: &Registry,
    intents: &[SegmentIntent],
    seed: u64,
    layout: &TrajectoryLayout,
) -> Result<AnnotationSet, AnnotationError> {
    if intents.is_empty() {
        return Err(AnnotationError::EmptyTrajectory);
    }
    let mut segments = Vec::with_capacity(intents.len());
    for (i, intent) in intents.iter().enumerate() {
        let mut row = Vec::with_capacity(StyleId::ALL.len());
        for style in StyleId::ALL {
            let mut rng = SplitMix64::stream(seed, domain::SEGMENT, i as u64, style.position() as u64);
            row.push(render_segment(registry, intent, style, &mut rng)?);
        }
        segments.push(row);
    }
    let trajectory = (0..layout.count())
        .map(|v| compose_trajectory(registry, intents, seed, layout, v).map(|d| d.text))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnnotationSet {
        seed,
        styles: StyleId::ALL.iter().map(|s| s.name()).collect(),
        segments,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::rng::Scripted;
    use crate::recipe::Movement;

    fn reg() -> Registry {
        Registry::builtin()
    }

    fn walk_forward_3s() -> SegmentIntent {
        SegmentIntent {
            index: 0,
            mode_index: 1,
            movement: Movement::Forward,
            turn_deg: None,
            speed: 1.0,
            duration_s: 3.0,
            height: None,
        }
    }

    fn style(register: Register, with_duration: bool) -> StyleId {
        StyleId { register, with_duration }
    }

    #[test]
    fn instruction_example() {
        // walk bank: walk, stride, march, step, pace; forward bank: forward, ahead, ...
        let s = render_segment(&reg(), &walk_forward_3s(), style(Register::Instruction, true), &mut Scripted::new([0, 0, 0, 0]))
            .unwrap();
        assert_eq!(s, "Walk forward for 3.0 seconds");
    }

    #[test]
    fn natural_example() {
        // manner bank: steadily, smoothly, briskly, ...
        let s = render_segment(&reg(), &walk_forward_3s(), style(Register::Natural, true), &mut Scripted::new([1, 1, 2, 0])).unwrap();
        assert_eq!(s, "Stride ahead briskly for about 3.0 seconds");
    }

    #[test]
    fn narrative_example() {
        let s = render_segment(&reg(), &walk_forward_3s(), style(Register::Narrative, true), &mut Scripted::new([2, 0, 0, 0]))
            .unwrap();
        assert_eq!(s, "The robot marches forward for 3.0 seconds");
    }

    #[test]
    fn concise_example() {
        let s = render_segment(&reg(), &walk_forward_3s(), style(Register::Concise, true), &mut Scripted::new([0, 0, 0, 0])).unwrap();
        assert_eq!(s, "walk forward 3.0s");
    }

    #[test]
    fn tempo_and_turn_clauses() {
        let intent = SegmentIntent {
            mode_index: 2,
            speed: 3.0,
            turn_deg: Some(-90.0),
            duration_s: 2.0,
            ..walk_forward_3s()
        };
        let picks = [0, 0, 0, 0];
        let s = render_segment(&reg(), &intent, style(Register::Instruction, true), &mut Scripted::new(picks)).unwrap();
        assert_eq!(s, "Run forward at full speed while making a quarter turn to the right for 2.0 seconds");
        let s = render_segment(&reg(), &intent, style(Register::Concise, false), &mut Scripted::new(picks)).unwrap();
        assert_eq!(s, "run forward at full speed quarter right turn");
    }

    #[test]
    fn run_tempo_endpoints_and_midpoint() {
        let r = reg();
        let run = r.get(2).unwrap();
        assert_eq!(tempo_adverb(run, 1.5).unwrap(), "at a jog");
        assert_eq!(tempo_adverb(run, 3.0).unwrap(), "at full speed");
        // floor((2.25 - 1.5) / 1.5 * 4) = 2
        assert_eq!(tempo_adverb(run, 2.25).unwrap(), run.tempo_bank.as_ref().unwrap()[2]);
        assert_eq!(tempo_adverb(run, 9.0).unwrap(), "at full speed");
        assert!(matches!(tempo_adverb(r.get(1).unwrap(), 1.0), Err(AnnotationError::NoTempoBank(_))));
    }

    #[test]
    fn buckets() {
        assert_eq!(turn_bucket(10.0).label(), "slight left");
        assert_eq!(turn_bucket(-90.0).label(), "quarter right");
        assert_eq!(turn_bucket(300.0).label(), "full left");
        assert_eq!(turn_bucket(15.0).size, BucketSize::Partial);
        assert_eq!(turn_bucket(14.999).size, BucketSize::Slight);
        assert_eq!(turn_bucket(-240.0).size, BucketSize::Full);
    }

    #[test]
    fn conjugation() {
        assert_eq!(third_person("march"), "marches");
        assert_eq!(third_person("jog quickly"), "jogs quickly");
        assert_eq!(third_person("go down on one knee"), "goes down on one knee");
        assert_eq!(third_person("carry a box"), "carries a box");
        assert_eq!(third_person("stay in a fighting stance"), "stays in a fighting stance");
        assert_eq!(third_person("tiptoe"), "tiptoes");
        assert_eq!(third_person("box in place"), "boxes in place");
        assert_eq!(third_person("dash"), "dashes");
    }

    #[test]
    fn empty_trajectory() {
        assert_eq!(
            render_trajectory(&reg(), &[], 1, &TrajectoryLayout::default()),
            Err(AnnotationError::EmptyTrajectory)
        );
    }
}
