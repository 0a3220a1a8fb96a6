//! Operator entry points behind the `strider` binary.

pub mod batch;
pub mod sweep;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use strider_core::annotation::StyleId;
use strider_core::dataset::{read_package, validate, DatasetError, Violation, MANIFEST_FILE};
use strider_core::registry::Registry;

/// Manifest timestamp for batch output: `SOURCE_DATE_EPOCH` if set,
/// otherwise the Unix epoch, so identical inputs give identical trees.
pub fn reproducible_timestamp(source_date_epoch: Option<&str>) -> String {
    let secs = source_date_epoch.and_then(|s| s.trim().parse::<i64>().ok()).unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Result of validating one package directory.
#[derive(Debug)]
pub enum Checked {
    Clean(PathBuf),
    Violations(PathBuf, Vec<Violation>),
    Unreadable(PathBuf, DatasetError),
}

impl Checked {
    pub fn is_clean(&self) -> bool {
        matches!(self, Checked::Clean(_))
    }
}

/// Package directories at `path`: the path itself if it is a package,
/// else its immediate subdirectories that are, in name order.
pub fn package_dirs(path: &Path) -> Vec<PathBuf> {
    if path.join(MANIFEST_FILE).is_file() {
        return vec![path.to_path_buf()];
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(path)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    dirs
}

/// Validates a package, or every package directly under a batch output
/// directory. A path holding no package yields one unreadable entry.
pub fn check_path(path: &Path, registry: &Registry) -> Vec<Checked> {
    let dirs = package_dirs(path);
    if dirs.is_empty() {
        let err = read_package(path).err().unwrap_or_else(|| DatasetError::NotAPackage(path.to_path_buf()));
        return vec![Checked::Unreadable(path.to_path_buf(), err)];
    }
    dirs.into_iter()
        .map(|d| match read_package(&d) {
            Ok(pkg) => {
                let v = validate(&pkg, registry);
                if v.is_empty() {
                    Checked::Clean(d)
                } else {
                    Checked::Violations(d, v)
                }
            }
            Err(e) => Checked::Unreadable(d, e),
        })
        .collect()
}

/// Human-readable summary of a package.
pub fn describe(path: &Path, registry: &Registry) -> Result<String, DatasetError> {
    let pkg = read_package(path)?;
    let m = &pkg.manifest;
    let mut s = String::new();
    let _ = writeln!(s, "session   {}", m.session_id);
    let _ = writeln!(s, "kind      {:?}", m.kind);
    if let Some(r) = &m.recipe {
        let _ = writeln!(s, "recipe    {} (seed {})", r.name, r.seed);
    }
    let _ = writeln!(s, "backend   {}", m.backend_name);
    let _ = writeln!(s, "duration  {:.2} s", m.duration_ms as f64 / 1000.0);
    let _ = writeln!(
        s,
        "streams   {} commands, {} reference, {} executed samples",
        pkg.commands.len(),
        pkg.reference.len(),
        pkg.executed.len()
    );
    let _ = writeln!(s, "seed      {}", m.seed);
    let _ = writeln!(s, "segments");
    for (seg, row) in pkg.segments.iter().zip(&pkg.annotations.segments) {
        let mode = registry.get(seg.mode).map_or_else(|_| seg.mode.to_string(), |m| m.name.clone());
        let _ = writeln!(
            s,
            "  {:>2}  {:>6}-{:<6} {:<16} {:<12} {:.2} m/s",
            seg.index,
            seg.start_ms,
            seg.end_ms,
            mode,
            seg.intent.movement.as_str(),
            seg.intent.speed
        );
        let timed = StyleId::ALL.iter().position(|st| st.name() == "instruction_timed").unwrap_or(0);
        if let Some(text) = row.get(timed) {
            let _ = writeln!(s, "      {text}");
        }
    }
    if let Some(first) = pkg.annotations.trajectory.first() {
        let _ = writeln!(s, "trajectory\n  {first}");
    }
    if let Some(last) = pkg.annotations.trajectory.last() {
        let _ = writeln!(s, "summary\n  {last}");
    }
    let v = validate(&pkg, registry);
    let _ = writeln!(s, "violations {}", v.len());
    for x in v {
        let _ = writeln!(s, "  {x}");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_defaults_to_epoch() {
        assert_eq!(reproducible_timestamp(None), "1970-01-01T00:00:00Z");
        assert_eq!(reproducible_timestamp(Some("86400")), "1970-01-02T00:00:00Z");
        assert_eq!(reproducible_timestamp(Some("junk")), "1970-01-01T00:00:00Z");
    }

    #[test]
    fn empty_dir_is_unreadable() {
        let dir = tempfile::tempdir().unwrap();
        let out = check_path(dir.path(), &Registry::builtin());
        assert!(matches!(out.as_slice(), [Checked::Unreadable(_, DatasetError::NotAPackage(_))]));
    }
}
