//! `rmt-lab` command line.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind, Severity};
use crate::report::render;
use crate::run::{load_manifest, run, Overrides, RunError, EXIT_IO, EXIT_OK, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "rmt-lab", version, about = "Monte Carlo experiments on Wigner-type random matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample matrices, record spectral summaries and fill the spectrum cache.
    Sample(CommonArgs),
    /// Joint and marginal small-ball probabilities of σ_min(A − λI).
    Smallball(CommonArgs),
    /// Envelope of k·μ_k/√n and distance to the semicircle law.
    Rigidity(CommonArgs),
    /// Smallest linear relation among eigenvalues, scaled over n.
    Relations(CommonArgs),
    /// Deterministic and Monte Carlo oracle checks; nonzero exit on failure.
    Oracle(CommonArgs),
    /// Joint small-ball probabilities at mesoscopic separation.
    Mesoscopic(CommonArgs),
    /// Render a markdown table from run manifests.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment config; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = automatic). Takes precedence over RMT_LAB_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Manifest files or run directories.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// Write `report.md` here instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn experiment(kind: ExperimentKind, args: &CommonArgs) -> i32 {
    let config = match &args.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error [CONFIG_PARSE]: {e:#}");
                return EXIT_VALIDATION;
            }
        },
        None => ExperimentConfig::default_for(kind),
    };
    let overrides = Overrides { seed: args.seed, workers: args.workers, out: args.out.clone() };
    match run(kind, config, &overrides) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            for d in &m.diagnostics {
                eprintln!("{d}");
            }
            for c in &m.checks {
                let value = c.value.map_or("n/a".to_string(), |v| format!("{v:e}"));
                println!("{} {}: {value} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.op, c.limit);
            }
            println!("wrote {} ({} files, {:.1} s, {} workers)", outcome.manifest_path.display(), m.outputs.len(), m.wall_time_s(), m.workers);
            outcome.exit_code()
        }
        Err(e) => {
            if let RunError::Validation(diags) = &e {
                for d in diags {
                    eprintln!("{d}");
                }
                let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
                eprintln!("{errors} validation error(s); nothing written");
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

fn report(args: &ReportArgs) -> i32 {
    let mut manifests = Vec::new();
    for p in &args.manifests {
        match load_manifest(p) {
            Ok(m) => manifests.push(m),
            Err(e) => {
                eprintln!("error: {e:#}");
                return EXIT_IO;
            }
        }
    }
    let text = render(&manifests);
    match &args.out {
        None => print!("{text}"),
        Some(dir) => {
            let path = dir.join("report.md");
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| crate::output::write_atomic(&path, text.as_bytes())) {
                eprintln!("error: writing {}: {e}", path.display());
                return EXIT_IO;
            }
        }
    }
    EXIT_OK
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Sample(a) => experiment(ExperimentKind::Sample, a),
        Command::Smallball(a) => experiment(ExperimentKind::Smallball, a),
        Command::Rigidity(a) => experiment(ExperimentKind::Rigidity, a),
        Command::Relations(a) => experiment(ExperimentKind::Relations, a),
        Command::Oracle(a) => experiment(ExperimentKind::Oracle, a),
        Command::Mesoscopic(a) => experiment(ExperimentKind::Mesoscopic, a),
        Command::Report(a) => report(a),
    }
}
