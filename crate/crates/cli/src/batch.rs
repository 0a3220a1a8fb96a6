//! Headless batch generation on the virtual clock.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use strider_core::annotation::derive_seed;
use strider_core::bridge::{execute_recipe, BridgeError};
use strider_core::dataset::{write_package, DatasetError, PackageMeta, SessionPackage};
use strider_core::planner::PlannerConfig;
use strider_core::protocol::TelemetrySample;
use strider_core::quality::{transition_quality, window_around, QualityThresholds};
use strider_core::recipe::{Recipe, RecipeError};
use strider_core::registry::Registry;
use thiserror::Error;

use crate::sweep::{SweepPoint, SweepSpec};

pub const REPORT_FILE: &str = "report.json";
/// Half-width of the telemetry window scored around each switch.
pub const QUALITY_HALF_WINDOW_MS: u64 = 500;

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub recipes: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub sweep: SweepSpec,
    pub filter: bool,
    pub thresholds: QualityThresholds,
    pub planner: PlannerConfig,
    /// RFC 3339 stamp written to every manifest.
    pub created_at: String,
    /// Worker threads; 0 picks the default.
    pub jobs: usize,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InvalidRecipe {
        path: PathBuf,
        #[source]
        source: RecipeError,
    },
    #[error("{path} (sweep {point}): {source}")]
    InvalidSweepPoint {
        path: PathBuf,
        point: String,
        #[source]
        source: RecipeError,
    },
    #[error("two recipe files share the name {0:?}")]
    DuplicateName(String),
    #[error("{session}: {source}")]
    Run {
        session: String,
        #[source]
        source: BridgeError,
    },
    #[error("{session}: {source}")]
    Package {
        session: String,
        #[source]
        source: DatasetError,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionStats {
    pub switch_ms: u64,
    pub from_mode: String,
    pub to_mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_speed_jump: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_height_rate: Option<f64>,
    /// `None` when the window was too short to score.
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Written,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub session_id: String,
    pub recipe: String,
    pub sweep: Vec<(String, f64)>,
    pub status: RunStatus,
    pub commands: usize,
    pub samples: usize,
    pub transitions: Vec<TransitionStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub seed: u64,
    pub filter: bool,
    pub thresholds: QualityThresholds,
    pub generated: usize,
    pub filtered: usize,
    pub runs: Vec<RunReport>,
}

struct Job {
    session_id: String,
    source: PathBuf,
    recipe: Recipe,
    point: SweepPoint,
}

fn stem(path: &Path) -> String {
    let s = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    strider_service::bridge::sanitize(&s)
}

fn plan(config: &BatchConfig, registry: &Registry) -> Result<Vec<Job>, BatchError> {
    let points = config.sweep.points();
    let mut names = BTreeSet::new();
    let mut jobs = Vec::new();
    for path in &config.recipes {
        let text = fs::read_to_string(path).map_err(|source| BatchError::Io { path: path.clone(), source })?;
        let recipe = Recipe::from_json(&text).map_err(|source| BatchError::InvalidRecipe { path: path.clone(), source })?;
        recipe.validate(registry).map_err(|source| BatchError::InvalidRecipe { path: path.clone(), source })?;
        let name = stem(path);
        if !names.insert(name.clone()) {
            return Err(BatchError::DuplicateName(name));
        }
        for point in &points {
            let swept = config.sweep.apply(&recipe, point, registry);
            swept.validate(registry).map_err(|source| BatchError::InvalidSweepPoint {
                path: path.clone(),
                point: point.to_string(),
                source,
            })?;
            let session_id = if points.len() == 1 { name.clone() } else { format!("{name}-{:03}", point.index) };
            jobs.push(Job { session_id, source: path.clone(), recipe: swept, point: point.clone() });
        }
    }
    Ok(jobs)
}

/// Scores every mode switch of a recording.
pub fn score_transitions(
    pkg: &SessionPackage,
    registry: &Registry,
    thresholds: &QualityThresholds,
) -> Vec<TransitionStats> {
    let name = |i: usize| registry.get(i).map_or_else(|_| i.to_string(), |m| m.name.clone());
    pkg.segments
        .windows(2)
        .filter(|w| w[0].mode != w[1].mode)
        .map(|w| {
            let switch_ms = w[1].start_ms;
            let window: &[TelemetrySample] = window_around(&pkg.reference, switch_ms, QUALITY_HALF_WINDOW_MS);
            let (from_mode, to_mode) = (name(w[0].mode), name(w[1].mode));
            match transition_quality(window, switch_ms, thresholds) {
                Ok(q) => TransitionStats {
                    switch_ms,
                    from_mode,
                    to_mode,
                    max_speed_jump: Some(q.max_speed_jump),
                    max_height_rate: Some(q.max_height_rate),
                    pass: Some(q.pass),
                    note: None,
                },
                Err(e) => TransitionStats {
                    switch_ms,
                    from_mode,
                    to_mode,
                    max_speed_jump: None,
                    max_height_rate: None,
                    pass: None,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn run_job(job: &Job, config: &BatchConfig, registry: &Arc<Registry>) -> Result<RunReport, BatchError> {
    let err_run = |source| BatchError::Run { session: job.session_id.clone(), source };
    let err_pkg = |source| BatchError::Package { session: job.session_id.clone(), source };
    let done = execute_recipe(registry.clone(), config.planner, job.recipe.clone()).map_err(err_run)?;
    let meta = PackageMeta {
        session_id: job.session_id.clone(),
        created_at: config.created_at.clone(),
        seed: derive_seed(config.seed, job.recipe.seed),
        backend_name: "reference-kinematic".into(),
    };
    let pkg = SessionPackage::from_session(&done, registry, meta).map_err(err_pkg)?;
    let transitions = score_transitions(&pkg, registry, &config.thresholds);
    let passed = transitions.iter().all(|t| t.pass != Some(false));
    let status = if passed || !config.filter {
        write_package(&pkg, registry, &config.out_dir.join(&job.session_id)).map_err(err_pkg)?;
        RunStatus::Written
    } else {
        RunStatus::Filtered
    };
    Ok(RunReport {
        session_id: job.session_id.clone(),
        recipe: job.source.display().to_string(),
        sweep: job.point.values.clone(),
        status,
        commands: pkg.commands.len(),
        samples: pkg.reference.len(),
        transitions,
    })
}

/// Runs every recipe at every sweep point, writes passing packages and
/// `report.json` under `config.out_dir`, and returns the report.
pub fn run_batch(config: &BatchConfig, registry: Arc<Registry>) -> Result<BatchReport, BatchError> {
    let jobs = plan(config, &registry)?;
    fs::create_dir_all(&config.out_dir).map_err(|source| BatchError::Io { path: config.out_dir.clone(), source })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))?;
    let runs = pool.install(|| {
        jobs.par_iter().map(|job| run_job(job, config, &registry)).collect::<Result<Vec<_>, _>>()
    })?;
    let generated = runs.iter().filter(|r| r.status == RunStatus::Written).count();
    let report = BatchReport {
        seed: config.seed,
        filter: config.filter,
        thresholds: config.thresholds,
        generated,
        filtered: runs.len() - generated,
        runs,
    };
    let path = config.out_dir.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(&report).expect("report serialization");
    text.push('\n');
    fs::write(&path, text).map_err(|source| BatchError::Io { path, source })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use strider_core::recipe::{Movement, SegmentSpec};

    fn write_recipe(dir: &Path, name: &str, recipe: &Recipe) -> PathBuf {
        let p = dir.join(format!("{name}.json"));
        fs::write(&p, recipe.to_json_pretty()).unwrap();
        p
    }

    fn config(dir: &Path, recipes: Vec<PathBuf>, sweep: SweepSpec) -> BatchConfig {
        BatchConfig {
            recipes,
            out_dir: dir.join("out"),
            seed: 9,
            sweep,
            filter: true,
            thresholds: QualityThresholds::default(),
            planner: PlannerConfig::default(),
            created_at: "1970-01-01T00:00:00Z".into(),
            jobs: 2,
        }
    }

    #[test]
    fn chain_reports_each_transition() {
        let dir = tempfile::tempdir().unwrap();
        let registry = Arc::new(Registry::builtin());
        let recipe = Recipe {
            name: "chain".into(),
            seed: 1,
            segments: vec![
                SegmentSpec::new("Squat", 1.5, Movement::None),
                SegmentSpec::new("Run", 2.0, Movement::Forward).with_speed(2.0),
                SegmentSpec::new("Elbow Crawl", 2.0, Movement::Forward),
            ],
        };
        let p = write_recipe(dir.path(), "chain", &recipe);
        let report = run_batch(&config(dir.path(), vec![p], SweepSpec::default()), registry).unwrap();
        assert_eq!(report.generated, 1);
        let t = &report.runs[0].transitions;
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].from_mode.as_str(), t[0].to_mode.as_str()), ("Squat", "Run"));
        assert_eq!((t[1].from_mode.as_str(), t[1].to_mode.as_str()), ("Run", "Elbow Crawl"));
        assert!(t.iter().all(|t| t.max_speed_jump.is_some() && t.pass == Some(true)));
        assert!(dir.path().join("out/chain/manifest.json").is_file());
        assert!(dir.path().join("out").join(REPORT_FILE).is_file());
    }

    #[test]
    fn strict_threshold_filters_runs() {
        let dir = tempfile::tempdir().unwrap();
        let registry = Arc::new(Registry::builtin());
        let recipe = Recipe {
            name: "w2r".into(),
            seed: 1,
            segments: vec![
                SegmentSpec::new("Walk", 1.0, Movement::Forward),
                SegmentSpec::new("Run", 1.0, Movement::Forward),
            ],
        };
        let p = write_recipe(dir.path(), "w2r", &recipe);
        let mut cfg = config(dir.path(), vec![p.clone()], SweepSpec::default());
        cfg.thresholds.max_speed_jump = 1e-6;
        let report = run_batch(&cfg, registry.clone()).unwrap();
        assert_eq!((report.generated, report.filtered), (0, 1));
        assert!(!dir.path().join("out/w2r").exists());
        cfg.filter = false;
        let report = run_batch(&cfg, registry).unwrap();
        assert_eq!(report.generated, 1);
    }

    #[test]
    fn invalid_sweep_point_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let registry = Arc::new(Registry::builtin());
        let recipe = Recipe { name: "r".into(), seed: 0, segments: vec![SegmentSpec::new("Run", 1.0, Movement::Forward)] };
        let p = write_recipe(dir.path(), "r", &recipe);
        let sweep = SweepSpec::parse("Run.speed=2.0,9.0", &registry).unwrap();
        let err = run_batch(&config(dir.path(), vec![p], sweep), registry).unwrap_err();
        assert!(matches!(err, BatchError::InvalidSweepPoint { .. }), "{err}");
    }
}
