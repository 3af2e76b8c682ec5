//! Runner: validation, execution, atomic output and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::SpectrumStore;
use crate::config::{has_errors, validate, Diagnostic, ExperimentConfig, ExperimentKind, Severity};
use crate::experiments::{run_experiment, CheckResult, Context, ExperimentError};
use crate::output::write_atomic;
use crate::pool::{resolve_workers, Pool};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const TOOL: &str = "rmt-lab";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_SOLVER_BUDGET: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    /// Effective configuration, after command-line overrides.
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub workers: usize,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// File names relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub failed_trials: u64,
    pub diagnostics: Vec<Diagnostic>,
    pub checks: Vec<CheckResult>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn wall_time_s(&self) -> f64 {
        self.finished_unix_ms.saturating_sub(self.started_unix_ms) as f64 / 1000.0
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration is not runnable")]
    Validation(Vec<Diagnostic>),
    #[error(transparent)]
    SolverBudget(ExperimentError),
    #[error("{0}")]
    Failed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::SolverBudget(_) => EXIT_SOLVER_BUDGET,
            Self::Failed(_) | Self::Io(_) => EXIT_IO,
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.passed() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Validate, run and persist one experiment. Nothing is written when
/// validation fails. Data files go through `.partial` names; the manifest is
/// renamed into place last.
pub fn run(kind: ExperimentKind, mut config: ExperimentConfig, overrides: &Overrides) -> Result<RunOutcome, RunError> {
    if let Some(seed) = overrides.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output_dir = out.clone();
    }
    config.experiment = config.experiment.or(Some(kind));
    let diagnostics = validate(&config, kind);
    if has_errors(&diagnostics) {
        return Err(RunError::Validation(diagnostics));
    }
    let workers = resolve_workers(overrides.workers, config.workers);
    let pool = Pool::new(workers).map_err(|e| RunError::Failed(format!("thread pool: {e}")))?;
    let store = config.spectrum_cache.as_ref().map(SpectrumStore::new);
    let started = now_ms();
    let output = run_experiment(kind, &config, &Context { pool: &pool, store: store.as_ref() }).map_err(|e| match e {
        e @ ExperimentError::SolverBudget(_) => RunError::SolverBudget(e),
        ExperimentError::Failed(m) => RunError::Failed(m),
    })?;

    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for f in &output.files {
        let bytes = f.bytes().map_err(|e| RunError::Failed(e.to_string()))?;
        write_atomic(&dir.join(&f.name), &bytes)?;
        outputs.push(f.name.clone());
    }
    let mut diagnostics: Vec<Diagnostic> = diagnostics.into_iter().filter(|d| d.severity == Severity::Warning).collect();
    if let Some(s) = &store {
        if s.write_failures() > 0 {
            diagnostics.push(Diagnostic {
                code: "CACHE_WRITE_FAILED".into(),
                severity: Severity::Warning,
                message: format!("{} spectra could not be cached", s.write_failures()),
            });
        }
    }
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: kind,
        master_seed: config.master_seed,
        config,
        workers,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs,
        failed_trials: output.failed_trials,
        diagnostics,
        checks: output.checks,
    };
    let manifest_path = dir.join(MANIFEST_NAME);
    for f in &manifest.outputs {
        debug_assert!(dir.join(f).is_file());
    }
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Failed(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(&manifest_path, &bytes)?;
    Ok(RunOutcome { manifest, manifest_path })
}

/// Load a manifest from a file or from `manifest.json` inside a directory.
pub fn load_manifest(path: &Path) -> anyhow::Result<(PathBuf, RunManifest)> {
    let file = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| anyhow::anyhow!("reading {}: {e}", file.display()))?;
    let m = serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("parsing {}: {e}", file.display()))?;
    Ok((file, m))
}
