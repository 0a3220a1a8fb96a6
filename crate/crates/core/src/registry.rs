//! The 25-mode motion-primitive registry and the language banks attached to it.
//!
//! Two documents back the registry, both JSON:
//!
//! * `registry.json` lists the modes in selector order with their group,
//!   capability flags, speed/height ranges, defaults and gait frequency.
//! * `banks.json` holds the annotation vocabulary: a verb bank per mode,
//!   a tempo bank per speed-capable mode (both keyed by mode name), and the
//!   shared direction, turn-verb, manner and connective banks.
//!
//! The built-in copies are embedded at compile time; [`Registry::load`]
//! reads replacements from disk.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::ModeSummary;
use crate::recipe::Movement;

pub const MODE_COUNT: usize = 25;

const BUILTIN_REGISTRY: &str = include_str!("../data/registry.json");
const BUILTIN_BANKS: &str = include_str!("../data/banks.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeGroup {
    Locomotion,
    #[serde(rename = "Squat/Ground")]
    SquatGround,
    Boxing,
    #[serde(rename = "Styled Walking")]
    StyledWalking,
}

impl ModeGroup {
    pub fn label(self) -> &'static str {
        match self {
            ModeGroup::Locomotion => "Locomotion",
            ModeGroup::SquatGround => "Squat/Ground",
            ModeGroup::Boxing => "Boxing",
            ModeGroup::StyledWalking => "Styled Walking",
        }
    }
}

/// Closed interval serialized as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

impl From<[f64; 2]> for Interval {
    fn from(a: [f64; 2]) -> Self {
        Self { min: a[0], max: a[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.min, i.max]
    }
}

/// One row of the registry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeEntry {
    index: usize,
    name: String,
    group: ModeGroup,
    supports_speed: bool,
    supports_heading: bool,
    supports_height: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed_range: Option<Interval>,
    default_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height_range: Option<Interval>,
    default_height: f64,
    gait_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    modes: Vec<ModeEntry>,
}

/// Annotation vocabulary shared by all modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageBanks {
    pub verbs: BTreeMap<String, Vec<String>>,
    pub tempo: BTreeMap<String, Vec<String>>,
    pub directions: BTreeMap<Movement, Vec<String>>,
    pub turn_verbs: Vec<String>,
    pub manner: Vec<String>,
    pub connectives: Vec<String>,
}

impl LanguageBanks {
    pub fn direction_bank(&self, movement: Movement) -> &[String] {
        self.directions.get(&movement).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub index: usize,
    pub name: String,
    pub group: ModeGroup,
    pub supports_speed: bool,
    pub supports_heading: bool,
    pub supports_height: bool,
    pub speed_range: Option<Interval>,
    pub default_speed: f64,
    pub height_range: Option<Interval>,
    pub default_height: f64,
    /// Gait cycles per second at `default_speed`.
    pub gait_frequency: f64,
    pub verb_bank: Vec<String>,
    pub tempo_bank: Option<Vec<String>>,
}

impl ModeSpec {
    /// Lower-case identifier with non-alphanumerics collapsed to `_`,
    /// e.g. `Kneel (Two)` -> `kneel_two`.
    pub fn key(&self) -> String {
        normalize_name(&self.name)
    }

    pub fn summary(&self) -> ModeSummary {
        ModeSummary {
            index: self.index,
            name: self.name.clone(),
            group: self.group.label().to_string(),
            supports_speed: self.supports_speed,
            supports_heading: self.supports_heading,
            supports_height: self.supports_height,
            speed_range: self.speed_range.map(Into::into),
            default_speed: self.default_speed,
            height_range: self.height_range.map(Into::into),
            default_height: self.default_height,
        }
    }
}

pub fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mode index {0}")]
pub struct UnknownMode(pub usize);

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {file}: {message}")]
    Parse { file: &'static str, message: String },
    #[error("registry must list {MODE_COUNT} modes, found {0}")]
    Count(usize),
    #[error("mode entry {index} ({name}): {reason}")]
    InvalidMode {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("banks: {0}")]
    InvalidBanks(String),
}

#[derive(Debug, Clone)]
pub struct Registry {
    modes: Vec<ModeSpec>,
    banks: LanguageBanks,
    hash: String,
}

impl Registry {
    /// The embedded registry and banks.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_REGISTRY, BUILTIN_BANKS).expect("embedded registry is valid")
    }

    pub fn load(registry_path: Option<&Path>, banks_path: Option<&Path>) -> Result<Self, RegistryError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| RegistryError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let reg = match registry_path {
            Some(p) => read(p)?,
            None => BUILTIN_REGISTRY.to_string(),
        };
        let banks = match banks_path {
            Some(p) => read(p)?,
            None => BUILTIN_BANKS.to_string(),
        };
        Self::from_json(&reg, &banks)
    }

    pub fn from_json(registry_text: &str, banks_text: &str) -> Result<Self, RegistryError> {
        let doc: RegistryDoc = serde_json::from_str(registry_text).map_err(|e| RegistryError::Parse {
            file: "registry",
            message: e.to_string(),
        })?;
        let banks: LanguageBanks = serde_json::from_str(banks_text).map_err(|e| RegistryError::Parse {
            file: "banks",
            message: e.to_string(),
        })?;
        Self::build(doc, banks)
    }

    fn build(doc: RegistryDoc, banks: LanguageBanks) -> Result<Self, RegistryError> {
        if doc.modes.len() != MODE_COUNT {
            return Err(RegistryError::Count(doc.modes.len()));
        }
        let mut modes = Vec::with_capacity(MODE_COUNT);
        for (pos, e) in doc.modes.iter().enumerate() {
            let fail = |reason: String| RegistryError::InvalidMode {
                index: pos,
                name: e.name.clone(),
                reason,
            };
            if e.index != pos {
                return Err(fail(format!("index {} does not match position {pos}", e.index)));
            }
            if doc.modes[..pos].iter().any(|m| normalize_name(&m.name) == normalize_name(&e.name)) {
                return Err(fail("duplicate mode name".into()));
            }
            match (e.supports_speed, e.speed_range) {
                (true, Some(r)) => {
                    if !(r.min.is_finite() && r.max.is_finite() && r.min >= 0.0 && r.min < r.max) {
                        return Err(fail(format!("bad speed_range [{}, {}]", r.min, r.max)));
                    }
                    if !r.contains(e.default_speed) {
                        return Err(fail(format!("default_speed {} outside speed_range", e.default_speed)));
                    }
                }
                (true, None) => return Err(fail("supports_speed requires speed_range".into())),
                (false, Some(_)) => return Err(fail("speed_range given but supports_speed is false".into())),
                (false, None) => {
                    if !(e.default_speed.is_finite() && e.default_speed >= 0.0) {
                        return Err(fail(format!("bad default_speed {}", e.default_speed)));
                    }
                }
            }
            match (e.supports_height, e.height_range) {
                (true, Some(r)) => {
                    if !(r.min.is_finite() && r.max.is_finite() && r.min > 0.0 && r.min < r.max) {
                        return Err(fail(format!("bad height_range [{}, {}]", r.min, r.max)));
                    }
                    if !r.contains(e.default_height) {
                        return Err(fail(format!("default_height {} outside height_range", e.default_height)));
                    }
                }
                (true, None) => return Err(fail("supports_height requires height_range".into())),
                (false, Some(_)) => return Err(fail("height_range given but supports_height is false".into())),
                (false, None) => {}
            }
            if !(e.default_height.is_finite() && e.default_height > 0.0) {
                return Err(fail(format!("bad default_height {}", e.default_height)));
            }
            if !(e.gait_frequency.is_finite() && e.gait_frequency >= 0.0) {
                return Err(fail(format!("bad gait_frequency {}", e.gait_frequency)));
            }
            let verb_bank = banks.verbs.get(&e.name).cloned().unwrap_or_default();
            if verb_bank.is_empty() || verb_bank.iter().any(|v| v.trim().is_empty()) {
                return Err(fail("verb bank missing or empty".into()));
            }
            let tempo_bank = banks.tempo.get(&e.name).cloned();
            match (&tempo_bank, e.supports_speed) {
                (Some(b), true) if !b.is_empty() => {}
                (_, true) => return Err(fail("speed-capable mode needs a non-empty tempo bank".into())),
                (Some(_), false) => return Err(fail("tempo bank given but mode has no speed support".into())),
                (None, false) => {}
            }
            modes.push(ModeSpec {
                index: pos,
                name: e.name.clone(),
                group: e.group,
                supports_speed: e.supports_speed,
                supports_heading: e.supports_heading,
                supports_height: e.supports_height,
                speed_range: e.speed_range,
                default_speed: e.default_speed,
                height_range: e.height_range,
                default_height: e.default_height,
                gait_frequency: e.gait_frequency,
                verb_bank,
                tempo_bank,
            });
        }
        for name in banks.verbs.keys().chain(banks.tempo.keys()) {
            if !doc.modes.iter().any(|m| &m.name == name) {
                return Err(RegistryError::InvalidBanks(format!("bank keyed by unknown mode {name:?}")));
            }
        }
        for m in Movement::ALL {
            if banks.direction_bank(m).is_empty() {
                return Err(RegistryError::InvalidBanks(format!("empty direction bank for {}", m.as_str())));
            }
        }
        for (label, bank) in [
            ("turn_verbs", &banks.turn_verbs),
            ("manner", &banks.manner),
            ("connectives", &banks.connectives),
        ] {
            if bank.is_empty() {
                return Err(RegistryError::InvalidBanks(format!("{label} bank is empty")));
            }
        }

        let mut hasher = Sha256::new();
        hasher.update(b"registry\n");
        hasher.update(serde_json::to_vec(&doc).expect("registry serialization"));
        hasher.update(b"\nbanks\n");
        hasher.update(serde_json::to_vec(&banks).expect("banks serialization"));
        let hash = hex::encode(hasher.finalize());

        Ok(Self { modes, banks, hash })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn get(&self, index: usize) -> Result<&ModeSpec, UnknownMode> {
        self.modes.get(index).ok_or(UnknownMode(index))
    }

    /// Looks a mode up by exact name or by its normalized key.
    pub fn by_name(&self, name: &str) -> Option<&ModeSpec> {
        self.modes
            .iter()
            .find(|m| m.name == name)
            .or_else(|| {
                let key = normalize_name(name);
                self.modes.iter().find(|m| m.key() == key)
            })
    }

    pub fn verb_bank(&self, index: usize) -> Result<&[String], UnknownMode> {
        self.get(index).map(|m| m.verb_bank.as_slice())
    }

    pub fn banks(&self) -> &LanguageBanks {
        &self.banks
    }

    /// SHA-256 over the canonical registry and bank documents.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Highest speed any mode can realize.
    pub fn max_speed(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.speed_range.map_or(m.default_speed, |r| r.max))
            .fold(0.0, f64::max)
    }

    /// Smallest interval covering every height range and default height.
    pub fn height_envelope(&self) -> Interval {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in &self.modes {
            let (a, b) = m.height_range.map_or((m.default_height, m.default_height), |r| (r.min, r.max));
            lo = lo.min(a.min(m.default_height));
            hi = hi.max(b.max(m.default_height));
        }
        Interval::new(lo, hi)
    }

    pub fn summaries(&self) -> Vec<ModeSummary> {
        self.modes.iter().map(ModeSpec::summary).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads() {
        let r = Registry::builtin();
        assert_eq!(r.len(), MODE_COUNT);
        assert_eq!(r.hash().len(), 64);
    }

    #[test]
    fn run_row() {
        let r = Registry::builtin();
        let run = r.get(2).unwrap();
        assert_eq!(run.name, "Run");
        assert!(run.supports_speed && run.supports_heading && !run.supports_height);
        assert_eq!(run.speed_range, Some(Interval::new(1.5, 3.0)));
        assert_eq!(
            r.verb_bank(2).unwrap(),
            ["run", "sprint", "dash", "jog quickly", "move at full speed"]
        );
    }

    #[test]
    fn five_height_modes() {
        let r = Registry::builtin();
        let names: Vec<_> = r.modes().iter().filter(|m| m.supports_height).map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["Squat", "Kneel (Two)", "Kneel (One)", "Hand Crawl", "Elbow Crawl"]);
    }

    #[test]
    fn unknown_index() {
        assert_eq!(Registry::builtin().verb_bank(25), Err(UnknownMode(25)));
    }

    #[test]
    fn name_lookup_accepts_keys() {
        let r = Registry::builtin();
        assert_eq!(r.by_name("Kneel (Two)").unwrap().index, 7);
        assert_eq!(r.by_name("kneel_two").unwrap().index, 7);
        assert_eq!(r.by_name("slow walk").unwrap().index, 0);
        assert!(r.by_name("Moonwalk").is_none());
    }

    #[test]
    fn bad_entry_is_named() {
        let text = BUILTIN_REGISTRY.replacen("\"default_speed\": 2.0", "\"default_speed\": 5.0", 1);
        let err = Registry::from_json(&text, BUILTIN_BANKS).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Run"), "{msg}");
        assert!(matches!(err, RegistryError::InvalidMode { index: 2, .. }));
    }

    #[test]
    fn missing_verb_bank_is_named() {
        let mut banks: LanguageBanks = serde_json::from_str(BUILTIN_BANKS).unwrap();
        banks.verbs.remove("Zombie");
        let err = Registry::from_json(BUILTIN_REGISTRY, &serde_json::to_string(&banks).unwrap()).unwrap_err();
        assert!(matches!(err, RegistryError::InvalidMode { index: 22, .. }), "{err}");
    }

    #[test]
    fn hash_tracks_banks() {
        let mut banks: LanguageBanks = serde_json::from_str(BUILTIN_BANKS).unwrap();
        banks.connectives.push("and then".into());
        let other = Registry::from_json(BUILTIN_REGISTRY, &serde_json::to_string(&banks).unwrap()).unwrap();
        assert_ne!(other.hash(), Registry::builtin().hash());
    }

    #[test]
    fn envelope_covers_standing_and_crawl() {
        let e = Registry::builtin().height_envelope();
        assert_eq!(e.min, 0.15);
        assert_eq!(e.max, 0.78);
        assert_eq!(Registry::builtin().max_speed(), 3.0);
    }
}
