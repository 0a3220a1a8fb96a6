use std::fmt;

use serde::Serialize;

use super::{
    SessionPackage, ANNOTATIONS_FILE, COMMANDS_FILE, EXECUTED_FILE, MANIFEST_FILE, REFERENCE_FILE, SEGMENTS_FILE,
};
use crate::annotation::{render_trajectory, StyleId, TrajectoryLayout};
use crate::bridge::{Recording, SegmentTag, COMMAND_PERIOD_MS, TELEMETRY_PERIOD_MS};
use crate::protocol::TelemetrySample;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    CountMismatch,
    DurationMismatch,
    SegmentEmpty,
    SegmentGap,
    SegmentOverlap,
    SegmentUncovered,
    SegmentSampleCount,
    NonMonotonic,
    JointsDim,
    RegistryHash,
    AnnotationShape,
    Traceability,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::CountMismatch => "count_mismatch",
            ViolationKind::DurationMismatch => "duration_mismatch",
            ViolationKind::SegmentEmpty => "segment_empty",
            ViolationKind::SegmentGap => "segment_gap",
            ViolationKind::SegmentOverlap => "segment_overlap",
            ViolationKind::SegmentUncovered => "segment_uncovered",
            ViolationKind::SegmentSampleCount => "segment_sample_count",
            ViolationKind::NonMonotonic => "non_monotonic",
            ViolationKind::JointsDim => "joints_dim",
            ViolationKind::RegistryHash => "registry_hash",
            ViolationKind::AnnotationShape => "annotation_shape",
            ViolationKind::Traceability => "traceability",
        }
    }
}

/// One failed invariant. `line` is 1-based within `file`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub file: &'static str,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}: {}", self.file, l, self.kind.as_str(), self.message),
            None => write!(f, "{}: {}: {}", self.file, self.kind.as_str(), self.message),
        }
    }
}

struct Sink(Vec<Violation>);

impl Sink {
    fn push(&mut self, kind: ViolationKind, file: &'static str, line: Option<usize>, message: impl Into<String>) {
        self.0.push(Violation { kind, file, line, message: message.into() });
    }
}

fn per_segment_expected(duration_ms: u64) -> i64 {
    (duration_ms as f64 / TELEMETRY_PERIOD_MS as f64).round() as i64
}

fn check_stream(out: &mut Sink, file: &'static str, samples: &[TelemetrySample], joints_dim: usize, end_ms: u64) {
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].timestamp_ms <= w[0].timestamp_ms {
            out.push(
                ViolationKind::NonMonotonic,
                file,
                Some(i + 2),
                format!("t={} does not follow t={}", w[1].timestamp_ms, w[0].timestamp_ms),
            );
        }
    }
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.joints.len() != joints_dim) {
        out.push(
            ViolationKind::JointsDim,
            file,
            Some(i + 1),
            format!("{} joints, manifest declares {joints_dim}", s.joints.len()),
        );
    }
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.timestamp_ms >= end_ms) {
        out.push(
            ViolationKind::SegmentUncovered,
            file,
            Some(i + 1),
            format!("t={} is past the last segment end {end_ms}", s.timestamp_ms),
        );
    }
}

/// Checks every package invariant; empty iff the package is sound.
pub fn validate(pkg: &SessionPackage, registry: &Registry) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Sink(Vec::new());
    let m = &pkg.manifest;

    if m.registry_hash != registry.hash() {
        out.push(
            RegistryHash,
            MANIFEST_FILE,
            None,
            format!("package built with {}, loaded registry is {}", m.registry_hash, registry.hash()),
        );
    }

    // segment partition
    let segs = &pkg.segments;
    if segs.is_empty() {
        out.push(SegmentEmpty, SEGMENTS_FILE, None, "no segments");
    }
    let mut cursor = 0u64;
    for (i, s) in segs.iter().enumerate() {
        let line = Some(i + 1);
        if s.index != i {
            out.push(SegmentOverlap, SEGMENTS_FILE, line, format!("index {} at position {i}", s.index));
        }
        if s.end_ms <= s.start_ms {
            out.push(SegmentEmpty, SEGMENTS_FILE, line, format!("[{}, {}) is empty", s.start_ms, s.end_ms));
        }
        if s.start_ms > cursor {
            out.push(SegmentGap, SEGMENTS_FILE, line, format!("gap [{cursor}, {})", s.start_ms));
        } else if s.start_ms < cursor {
            out.push(SegmentOverlap, SEGMENTS_FILE, line, format!("starts at {} before {cursor}", s.start_ms));
        }
        if s.mode != s.intent.mode_index || registry.get(s.mode).is_err() {
            out.push(Traceability, SEGMENTS_FILE, line, format!("mode {} vs intent mode {}", s.mode, s.intent.mode_index));
        }
        cursor = cursor.max(s.end_ms);
    }
    let end_ms = segs.last().map_or(0, |s| s.end_ms);
    if end_ms != m.duration_ms {
        out.push(
            DurationMismatch,
            MANIFEST_FILE,
            None,
            format!("duration_ms {} but segments end at {end_ms}", m.duration_ms),
        );
    }

    // stream counts
    let (nr, ne) = (pkg.reference.len() as i64, pkg.executed.len() as i64);
    if (nr - ne).abs() > 1 {
        let file = if ne < nr { EXECUTED_FILE } else { REFERENCE_FILE };
        out.push(CountMismatch, file, None, format!("reference has {nr} samples, executed {ne}"));
    }
    let slack = segs.len().max(1) as i64;
    let expected = per_segment_expected(end_ms);
    for (file, n) in [(REFERENCE_FILE, nr), (EXECUTED_FILE, ne)] {
        if (n - expected).abs() > slack {
            out.push(CountMismatch, file, None, format!("{n} samples for {end_ms} ms, expected {expected}±{slack}"));
        }
    }
    let expected_cmds = end_ms.div_ceil(COMMAND_PERIOD_MS) as i64;
    let nc = pkg.commands.len() as i64;
    if (nc - expected_cmds).abs() > slack {
        out.push(CountMismatch, COMMANDS_FILE, None, format!("{nc} commands for {end_ms} ms, expected {expected_cmds}±{slack}"));
    }
    for (i, w) in pkg.commands.windows(2).enumerate() {
        if w[1].timestamp_ms <= w[0].timestamp_ms {
            out.push(NonMonotonic, COMMANDS_FILE, Some(i + 2), format!("t={} does not follow t={}", w[1].timestamp_ms, w[0].timestamp_ms));
        }
    }
    if let Some((i, c)) = pkg.commands.iter().enumerate().find(|(_, c)| c.timestamp_ms >= end_ms) {
        out.push(SegmentUncovered, COMMANDS_FILE, Some(i + 1), format!("t={} is past the last segment end {end_ms}", c.timestamp_ms));
    }
    check_stream(&mut out, REFERENCE_FILE, &pkg.reference, m.joints_dim, end_ms);
    check_stream(&mut out, EXECUTED_FILE, &pkg.executed, m.joints_dim, end_ms);

    // per-segment alignment
    for (i, s) in segs.iter().enumerate() {
        if s.end_ms <= s.start_ms {
            continue;
        }
        let n = pkg.reference.iter().filter(|x| s.start_ms <= x.timestamp_ms && x.timestamp_ms < s.end_ms).count() as i64;
        let want = per_segment_expected(s.end_ms - s.start_ms);
        if (n - want).abs() > 1 {
            out.push(
                SegmentSampleCount,
                SEGMENTS_FILE,
                Some(i + 1),
                format!("{n} reference samples in [{}, {}), expected {want}±1", s.start_ms, s.end_ms),
            );
        }
    }

    // annotations
    let a = &pkg.annotations;
    let layout = TrajectoryLayout::default();
    let styles: Vec<String> = StyleId::ALL.iter().map(|s| s.name()).collect();
    let mut shape_ok = true;
    if a.styles != styles {
        out.push(AnnotationShape, ANNOTATIONS_FILE, None, format!("styles {:?}", a.styles));
        shape_ok = false;
    }
    if a.segments.len() != segs.len() || a.segments.iter().any(|r| r.len() != styles.len()) {
        out.push(
            AnnotationShape,
            ANNOTATIONS_FILE,
            None,
            format!("expected {} segments × {} styles", segs.len(), styles.len()),
        );
        shape_ok = false;
    }
    if a.trajectory.len() != layout.count() {
        out.push(
            AnnotationShape,
            ANNOTATIONS_FILE,
            None,
            format!("{} trajectory descriptions, expected {}", a.trajectory.len(), layout.count()),
        );
        shape_ok = false;
    }
    if a.seed != m.seed {
        out.push(Traceability, ANNOTATIONS_FILE, None, format!("seed {} but manifest seed {}", a.seed, m.seed));
    }

    // traceability: intents recovered from the command stream and tags
    let rec = Recording {
        origin_ms: 0,
        commands: pkg.commands.clone(),
        reference: Vec::new(),
        executed: Vec::new(),
        segments: segs
            .iter()
            .map(|s| SegmentTag {
                index: s.index,
                mode: s.mode,
                start_ms: s.start_ms,
                end_ms: s.end_ms,
                movement: s.intent.movement,
                turn_deg: s.intent.turn_deg,
                height: s.intent.height,
            })
            .collect(),
        joints_dim: Some(m.joints_dim),
    };
    let recovered = rec.intents(registry);
    let mut traced = true;
    for (i, (s, r)) in segs.iter().zip(&recovered).enumerate() {
        if s.intent != *r {
            out.push(
                Traceability,
                SEGMENTS_FILE,
                Some(i + 1),
                format!("intent {:?} not reproducible from commands (got {:?})", s.intent, r),
            );
            traced = false;
        }
    }
    if shape_ok && traced && !segs.is_empty() && m.registry_hash == registry.hash() {
        let intents: Vec<_> = segs.iter().map(|s| s.intent.clone()).collect();
        match render_trajectory(registry, &intents, a.seed, &layout) {
            Ok(expected) if expected == *a => {}
            Ok(_) => out.push(Traceability, ANNOTATIONS_FILE, None, "annotations differ from a re-render of the segment intents"),
            Err(e) => out.push(Traceability, ANNOTATIONS_FILE, None, e.to_string()),
        }
    }

    out.0
}

#[cfg(test)]
mod tests {
    use super::super::tests::sample_package;
    use super::*;

    fn kinds(v: &[Violation]) -> Vec<ViolationKind> {
        v.iter().map(|v| v.kind).collect()
    }

    #[test]
    fn clean_package() {
        let (reg, pkg) = sample_package();
        assert_eq!(validate(&pkg, &reg), vec![]);
    }

    #[test]
    fn executed_truncated_by_ten() {
        let (reg, mut pkg) = sample_package();
        pkg.executed.truncate(pkg.executed.len() - 10);
        let v = validate(&pkg, &reg);
        assert!(v.iter().any(|v| v.kind == ViolationKind::CountMismatch && v.file == EXECUTED_FILE), "{v:?}");
    }

    #[test]
    fn overlap() {
        let (reg, mut pkg) = sample_package();
        pkg.segments[1].start_ms -= 200;
        assert!(kinds(&validate(&pkg, &reg)).contains(&ViolationKind::SegmentOverlap));
    }

    #[test]
    fn hole_inside_segment() {
        let (reg, mut pkg) = sample_package();
        pkg.reference.drain(120..125);
        pkg.executed.drain(120..125);
        let v = validate(&pkg, &reg);
        assert!(v.iter().any(|v| v.kind == ViolationKind::SegmentSampleCount && v.line == Some(2)), "{v:?}");
        assert!(!v.iter().any(|v| v.kind == ViolationKind::SegmentSampleCount && v.line != Some(2)));
    }

    #[test]
    fn tampered_speed_breaks_traceability() {
        let (reg, mut pkg) = sample_package();
        pkg.segments[1].intent.speed = 3.0;
        assert!(kinds(&validate(&pkg, &reg)).contains(&ViolationKind::Traceability));
    }

    #[test]
    fn tampered_annotation_detected() {
        let (reg, mut pkg) = sample_package();
        pkg.annotations.segments[0][0].push('!');
        assert_eq!(kinds(&validate(&pkg, &reg)), vec![ViolationKind::Traceability]);
    }

    #[test]
    fn registry_hash_and_joints() {
        let (reg, mut pkg) = sample_package();
        pkg.manifest.registry_hash = "00".into();
        pkg.manifest.joints_dim = 3;
        let v = kinds(&validate(&pkg, &reg));
        assert!(v.contains(&ViolationKind::RegistryHash));
        assert!(v.contains(&ViolationKind::JointsDim));
    }

    #[test]
    fn non_monotonic_locus() {
        let (reg, mut pkg) = sample_package();
        pkg.reference.swap(10, 11);
        let v = validate(&pkg, &reg);
        assert!(v.iter().any(|v| v.kind == ViolationKind::NonMonotonic && v.line == Some(12)), "{v:?}");
    }

    #[test]
    fn display_includes_locus() {
        let v = Violation { kind: ViolationKind::SegmentGap, file: SEGMENTS_FILE, line: Some(2), message: "gap [1900, 2000)".into() };
        assert_eq!(v.to_string(), "segments.jsonl:2: segment_gap: gap [1900, 2000)");
    }
}
