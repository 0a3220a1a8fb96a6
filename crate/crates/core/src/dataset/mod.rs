//! Session packages: one directory per recording.
//!
//! ```text
//! <session>/
//!   manifest.json      session metadata, inlined recipe, rates, registry hash
//!   commands.jsonl     effective (post-clamp) command stream
//!   reference.jsonl    kinematic reference channel
//!   executed.jsonl     executed channel
//!   segments.jsonl     segment tags with their intents
//!   annotations.json   per-segment and full-trajectory descriptions
//! ```
//!
//! Stream files reuse the wire encoding, one record per line.

mod validate;

pub use validate::{validate, Violation, ViolationKind};

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{render_trajectory, AnnotationError, AnnotationSet, SegmentIntent, TrajectoryLayout};
use crate::bridge::{FinishedSession, SessionKind, COMMAND_PERIOD_MS, TELEMETRY_PERIOD_MS};
use crate::protocol::{decode_command, decode_telemetry, encode_command, encode_telemetry, MetaCommand, TelemetrySample};
use crate::recipe::Recipe;
use crate::registry::Registry;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMMANDS_FILE: &str = "commands.jsonl";
pub const REFERENCE_FILE: &str = "reference.jsonl";
pub const EXECUTED_FILE: &str = "executed.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.json";

pub const PACKAGE_FILES: [&str; 6] =
    [MANIFEST_FILE, COMMANDS_FILE, REFERENCE_FILE, EXECUTED_FILE, SEGMENTS_FILE, ANNOTATIONS_FILE];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub command_hz: u32,
    pub telemetry_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            command_hz: (1000 / COMMAND_PERIOD_MS) as u32,
            telemetry_hz: (1000 / TELEMETRY_PERIOD_MS) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub session_id: String,
    pub created_at: String,
    pub kind: SessionKind,
    /// Present for recipe sessions; keyboard sessions have none.
    pub recipe: Option<Recipe>,
    /// Annotation seed.
    pub seed: u64,
    pub rates: Rates,
    pub duration_ms: u64,
    pub joints_dim: usize,
    pub backend_name: String,
    pub registry_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub index: usize,
    pub mode: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub intent: SegmentIntent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPackage {
    pub manifest: Manifest,
    pub commands: Vec<MetaCommand>,
    pub reference: Vec<TelemetrySample>,
    pub executed: Vec<TelemetrySample>,
    pub segments: Vec<SegmentRecord>,
    pub annotations: AnnotationSet,
}

/// Caller-supplied manifest fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageMeta {
    pub session_id: String,
    pub created_at: String,
    pub seed: u64,
    pub backend_name: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("not a package: {0}")]
    NotAPackage(PathBuf),
    #[error("package fails alignment checks ({} violation(s)); first: {}", .0.len(), .0[0])]
    Alignment(Vec<Violation>),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

impl DatasetError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            DatasetError::Alignment(v) => v,
            _ => &[],
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

impl SessionPackage {
    /// Assembles a package from a finished session, annotating it with
    /// `meta.seed`.
    pub fn from_session(done: &FinishedSession, registry: &Registry, meta: PackageMeta) -> Result<Self, DatasetError> {
        let rec = &done.recording;
        let intents = rec.intents(registry);
        let annotations = render_trajectory(registry, &intents, meta.seed, &TrajectoryLayout::default())?;
        let segments = rec
            .segments
            .iter()
            .zip(intents)
            .map(|(tag, intent)| SegmentRecord {
                index: tag.index,
                mode: tag.mode,
                start_ms: tag.start_ms,
                end_ms: tag.end_ms,
                intent,
            })
            .collect();
        Ok(Self {
            manifest: Manifest {
                session_id: meta.session_id,
                created_at: meta.created_at,
                kind: done.kind,
                recipe: done.recipe.clone(),
                seed: meta.seed,
                rates: Rates::default(),
                duration_ms: rec.duration_ms(),
                joints_dim: rec.joints_dim.unwrap_or(0),
                backend_name: meta.backend_name,
                registry_hash: registry.hash().to_string(),
            },
            commands: rec.commands.clone(),
            reference: rec.reference.clone(),
            executed: rec.executed.clone(),
            segments,
            annotations,
        })
    }

    /// File name to contents, in [`PACKAGE_FILES`] order.
    pub fn render_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut manifest = serde_json::to_vec_pretty(&self.manifest).expect("manifest serialization");
        manifest.push(b'\n');
        let cmds = self.commands.iter().flat_map(|c| encode_command(c).unwrap_or_else(|_| raw_line(c))).collect();
        let stream = |xs: &[TelemetrySample]| -> Vec<u8> {
            xs.iter().flat_map(|s| encode_telemetry(s).unwrap_or_else(|_| raw_line(s))).collect()
        };
        let segs = self.segments.iter().flat_map(raw_line).collect();
        vec![
            (MANIFEST_FILE, manifest),
            (COMMANDS_FILE, cmds),
            (REFERENCE_FILE, stream(&self.reference)),
            (EXECUTED_FILE, stream(&self.executed)),
            (SEGMENTS_FILE, segs),
            (ANNOTATIONS_FILE, self.annotations.to_json_pretty().into_bytes()),
        ]
    }
}

fn raw_line<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(v).expect("record serialization");
    out.push(b'\n');
    out
}

/// Validates `pkg` against `registry` and writes it to `path` atomically:
/// files go to a sibling temporary directory which is then renamed into
/// place, replacing any previous package there.
pub fn write_package(pkg: &SessionPackage, registry: &Registry, path: &Path) -> Result<(), DatasetError> {
    let violations = validate(pkg, registry);
    if !violations.is_empty() {
        return Err(DatasetError::Alignment(violations));
    }
    write_unchecked(pkg, path)
}

/// Writes without validating. Used to build fault-injection fixtures.
pub fn write_unchecked(pkg: &SessionPackage, path: &Path) -> Result<(), DatasetError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let name = path.file_name().ok_or_else(|| DatasetError::NotAPackage(path.to_path_buf()))?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(io_err(&tmp))?;
    let result = (|| {
        for (file, bytes) in pkg.render_files() {
            let p = tmp.join(file);
            fs::write(&p, bytes).map_err(io_err(&p))?;
        }
        if path.exists() {
            fs::remove_dir_all(path).map_err(io_err(path))?;
        }
        fs::rename(&tmp, path).map_err(io_err(path))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

fn read_file(dir: &Path, file: &str) -> Result<String, DatasetError> {
    let p = dir.join(file);
    fs::read_to_string(&p).map_err(io_err(&p))
}

fn parse_lines<T>(
    dir: &Path,
    file: &str,
    parse: impl Fn(&[u8]) -> Result<T, String>,
) -> Result<Vec<T>, DatasetError> {
    let text = read_file(dir, file)?;
    let mut out = Vec::new();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let frame = if line.ends_with('\n') { line.to_string() } else { format!("{line}\n") };
        let v = parse(frame.as_bytes()).map_err(|message| DatasetError::Parse {
            file: file.to_string(),
            line: i + 1,
            message,
        })?;
        out.push(v);
    }
    Ok(out)
}

fn parse_doc<T: for<'de> Deserialize<'de>>(dir: &Path, file: &str) -> Result<T, DatasetError> {
    let text = read_file(dir, file)?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        file: file.to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Parses every file of a package without checking invariants.
pub fn read_package(path: &Path) -> Result<SessionPackage, DatasetError> {
    if !path.is_dir() || !path.join(MANIFEST_FILE).is_file() {
        return Err(DatasetError::NotAPackage(path.to_path_buf()));
    }
    Ok(SessionPackage {
        manifest: parse_doc(path, MANIFEST_FILE)?,
        commands: parse_lines(path, COMMANDS_FILE, |b| decode_command(b).map_err(|e| e.to_string()))?,
        reference: parse_lines(path, REFERENCE_FILE, |b| decode_telemetry(b).map_err(|e| e.to_string()))?,
        executed: parse_lines(path, EXECUTED_FILE, |b| decode_telemetry(b).map_err(|e| e.to_string()))?,
        segments: parse_lines(path, SEGMENTS_FILE, |b| serde_json::from_slice(b).map_err(|e| e.to_string()))?,
        annotations: parse_doc(path, ANNOTATIONS_FILE)?,
    })
}

/// Reads and validates a package.
pub fn load_package(path: &Path, registry: &Registry) -> Result<SessionPackage, DatasetError> {
    let pkg = read_package(path)?;
    let violations = validate(&pkg, registry);
    if violations.is_empty() {
        Ok(pkg)
    } else {
        Err(DatasetError::Alignment(violations))
    }
}
