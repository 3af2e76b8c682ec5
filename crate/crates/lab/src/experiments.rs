//! Experiment drivers. Each turns a validated config into in-memory output
//! files plus check outcomes; the runner does all file IO.

use rmt_lab_core::ensemble::EnsembleSpec;
use rmt_lab_core::exec::TrialExecutor;
use rmt_lab_core::linalg::DenseMatrix;
use rmt_lab_core::oracles::{
    decoupling_check, distance_identity_check, hanson_wright_check, operator_norm_tail, product_inequality_check,
    region_volume_check, sigma_min_distance_bound_check, DecouplingConfig, IdentityCheckResult, OracleError,
};
use rmt_lab_core::relations::{scaling_vs_n_with, RelationError};
use rmt_lab_core::rigidity::{aggregate_rigidity, distance_to_semicircle, rigidity_trial, wasserstein1_to_semicircle, RigidityError, RigidityTrial};
use rmt_lab_core::rng::{rng_from_seed, substream};
use rmt_lab_core::smallball::{collect_samples_from, fit_scaling, mesoscopic_locations, SmallBallError, MAX_FAILURE_RATE};
use rmt_lab_core::spectral::{delocalization_fraction, operator_norm, SpectralError, Spectrum};
use rmt_lab_core::stats::{median, ScalingFit};
use rmt_lab_core::EntryDistribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{spectrum, SpectrumStore};
use crate::config::{mesoscopic_n_grid, ExperimentConfig, ExperimentKind, OracleCheck};
use crate::output::{fmt_f64, join_f64, join_u64, OutputFile, Table};
use crate::output::{MESOSCOPIC_HEADER, ORACLE_HEADER, RELATIONS_HEADER, RIGIDITY_HEADER, SAMPLE_HEADER, SEMICIRCLE_HEADER, SMALLBALL_HEADER};
use crate::pool::Pool;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("solver failure budget exceeded: {0}")]
    SolverBudget(String),
    #[error("{0}")]
    Failed(String),
}

impl From<SmallBallError> for ExperimentError {
    fn from(e: SmallBallError) -> Self {
        match e {
            SmallBallError::FailureBudgetExceeded { .. } => Self::SolverBudget(e.to_string()),
            e => Self::Failed(e.to_string()),
        }
    }
}

impl From<RelationError> for ExperimentError {
    fn from(e: RelationError) -> Self {
        match e {
            RelationError::Spectral(SpectralError::SolverFailure { .. }) => Self::SolverBudget(e.to_string()),
            e => Self::Failed(e.to_string()),
        }
    }
}

impl From<RigidityError> for ExperimentError {
    fn from(e: RigidityError) -> Self {
        Self::Failed(e.to_string())
    }
}

impl From<OracleError> for ExperimentError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Spectral(SpectralError::SolverFailure { .. }) => Self::SolverBudget(e.to_string()),
            e => Self::Failed(e.to_string()),
        }
    }
}

/// Outcome of one pass/fail criterion. `value` is `null` in JSON when it
/// could not be computed, which counts as a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: Option<f64>,
    pub op: String,
    pub limit: f64,
    pub passed: bool,
}

impl CheckResult {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        let v = value.is_finite().then_some(value);
        Self { name: name.into(), value: v, op: "<=".into(), limit, passed: v.is_some_and(|v| v <= limit) }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        let v = value.is_finite().then_some(value);
        Self { name: name.into(), value: v, op: ">=".into(), limit, passed: v.is_some_and(|v| v >= limit) }
    }

    fn greater(name: impl Into<String>, value: f64, limit: f64) -> Self {
        let v = value.is_finite().then_some(value);
        Self { name: name.into(), value: v, op: ">".into(), limit, passed: v.is_some_and(|v| v > limit) }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: Some(if ok { 1.0 } else { 0.0 }), op: "==".into(), limit: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub files: Vec<OutputFile>,
    pub failed_trials: u64,
    pub checks: Vec<CheckResult>,
}

pub struct Context<'a> {
    pub pool: &'a Pool,
    pub store: Option<&'a SpectrumStore>,
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    match kind {
        ExperimentKind::Sample => sample(cfg, ctx),
        ExperimentKind::Smallball => smallball(cfg, ctx),
        ExperimentKind::Mesoscopic => mesoscopic(cfg, ctx),
        ExperimentKind::Rigidity => rigidity(cfg, ctx),
        ExperimentKind::Relations => relations(cfg, ctx),
        ExperimentKind::Oracle => oracle(cfg, ctx),
    }
}

fn check_budget(failed: u64, trials: u64) -> Result<(), ExperimentError> {
    if failed as f64 > MAX_FAILURE_RATE * trials as f64 {
        return Err(ExperimentError::SolverBudget(format!("{failed} of {trials} trials failed to decompose")));
    }
    Ok(())
}

/// Maps a decomposition result to `Ok(None)` for a solver failure (a failed
/// trial) and an error for anything else.
fn solved(r: Result<Spectrum, SpectralError>) -> Result<Option<Spectrum>, ExperimentError> {
    match r {
        Ok(s) => Ok(Some(s)),
        Err(SpectralError::SolverFailure { .. }) => Ok(None),
        Err(e) => Err(ExperimentError::Failed(e.to_string())),
    }
}

// ---------------------------------------------------------------- sample

struct SampleRow {
    trial: u64,
    lambda_min: f64,
    lambda_max: f64,
    op_norm: f64,
    residual: f64,
    w1: f64,
    deloc_min: Option<f64>,
}

#[derive(Serialize)]
struct SampleSummary {
    n: usize,
    trials: u64,
    completed: usize,
    failed_trials: u64,
    max_residual_norm: f64,
    median_w1: Option<f64>,
    deloc_coeff: Option<f64>,
    /// Smallest delocalization fraction over all eigenvectors and samples.
    deloc_min_fraction: Option<f64>,
}

fn sample(cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.ensemble.spec(cfg.master_seed);
    let vectors = cfg.sample.vectors;
    let coeff = cfg.sample.deloc_coeff;
    let rows = ctx.pool.map_trials(cfg.trials, |t| -> Result<Option<SampleRow>, ExperimentError> {
        let Some(s) = solved(spectrum(ctx.store, &spec, t, vectors))? else {
            return Ok(None);
        };
        let deloc_min = if vectors {
            let mut worst = f64::INFINITY;
            for k in 0..s.n {
                let v = s.eigenvector(k).expect("vectors requested");
                worst = worst.min(delocalization_fraction(v, coeff).map_err(|e| ExperimentError::Failed(e.to_string()))?);
            }
            Some(worst)
        } else {
            None
        };
        Ok(Some(SampleRow {
            trial: t,
            lambda_min: s.eigenvalues[0],
            lambda_max: s.eigenvalues[s.n - 1],
            op_norm: operator_norm(&s),
            residual: s.residual_norm,
            w1: wasserstein1_to_semicircle(&s.normalized()),
            deloc_min,
        }))
    });
    let rows: Vec<SampleRow> = rows.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
    let failed = cfg.trials - rows.len() as u64;
    check_budget(failed, cfg.trials)?;

    let mut table = Table::new(SAMPLE_HEADER);
    for r in &rows {
        table.push(vec![
            spec.n.to_string(),
            r.trial.to_string(),
            spec.trial_seed(r.trial).to_string(),
            fmt_f64(r.lambda_min),
            fmt_f64(r.lambda_max),
            fmt_f64(r.op_norm),
            fmt_f64(r.residual),
            fmt_f64(r.w1),
            r.deloc_min.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    let delocs: Vec<f64> = rows.iter().filter_map(|r| r.deloc_min).collect();
    let summary = SampleSummary {
        n: spec.n,
        trials: cfg.trials,
        completed: rows.len(),
        failed_trials: failed,
        max_residual_norm: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        median_w1: median(&rows.iter().map(|r| r.w1).collect::<Vec<_>>()),
        deloc_coeff: vectors.then_some(coeff),
        deloc_min_fraction: delocs.iter().copied().reduce(f64::min),
    };

    let mut checks = Vec::new();
    if vectors {
        let need = cfg.check.deloc_fraction_min.unwrap_or(0.0);
        let share = if delocs.is_empty() { f64::NAN } else { delocs.iter().filter(|f| **f >= need).count() as f64 / delocs.len() as f64 };
        if let Some(min_share) = cfg.check.deloc_share_min {
            checks.push(CheckResult::at_least(format!("deloc_share[fraction>={need}]"), share, min_share));
        } else if cfg.check.deloc_fraction_min.is_some() {
            checks.push(CheckResult::at_least(format!("deloc_share[fraction>={need}]"), share, 1.0));
        }
    }
    Ok(ExperimentOutput {
        files: vec![OutputFile::csv("sample.csv", table), OutputFile::json("sample_summary.json", &summary)],
        failed_trials: failed,
        checks,
    })
}

// ------------------------------------------------------ smallball family

#[derive(Debug, Clone, Serialize)]
struct CellSummary {
    deltas: Vec<f64>,
    successes: u64,
    p_hat: f64,
    ci_lo: f64,
    ci_hi: f64,
    marginal_p: Option<Vec<f64>>,
    ratio: Option<f64>,
    ratio_ci_lo: Option<f64>,
    ratio_ci_hi: Option<f64>,
    /// One-sided upper confidence bound on the ratio at `ci_level`.
    ratio_upper_one_sided: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct BlockSummary {
    n: usize,
    d: usize,
    lambdas: Vec<f64>,
    trials: u64,
    failed_trials: u64,
    ci_level: f64,
    /// Log-log fit of joint `p_hat` against the scalar thresholds.
    fit: Option<ScalingFit>,
    fit_error: Option<String>,
    cells: Vec<CellSummary>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn tail_block(cfg: &ExperimentConfig, ctx: &Context, spec: &EnsembleSpec, lambdas: &[f64], table: &mut Table) -> Result<BlockSummary, ExperimentError> {
    let n = spec.n;
    let d = lambdas.len();
    let level = cfg.ci_level;
    let samples = collect_samples_from(n, lambdas, cfg.trials, ctx.pool, |t| Ok(spectrum(ctx.store, spec, t, false)))?;
    let rows = cfg.grids.delta_rows(d);
    let mut cells = Vec::with_capacity(rows.len());
    let mut scalar_points = Vec::new();
    for (i, delta) in rows.iter().enumerate() {
        let est = samples.estimate(delta, level)?;
        let (fr, upper) = if d >= 2 {
            let fr = samples.factorization(delta, level)?;
            let upper = if level > 0.5 { Some(samples.factorization(delta, 2.0 * level - 1.0)?.ci_hi) } else { None };
            (Some(fr), upper)
        } else {
            (None, None)
        };
        table.push(vec![
            n.to_string(),
            d.to_string(),
            join_f64(lambdas),
            join_f64(delta),
            est.trials.to_string(),
            est.successes.to_string(),
            fmt_f64(est.p_hat),
            fmt_f64(est.ci_lo),
            fmt_f64(est.ci_hi),
            join_u64(&est.per_location_successes),
            est.failed_trials.to_string(),
            fr.as_ref().map(|f| fmt_f64(f.ratio)).unwrap_or_default(),
            fr.as_ref().map(|f| fmt_f64(f.ci_lo)).unwrap_or_default(),
            fr.as_ref().map(|f| fmt_f64(f.ci_hi)).unwrap_or_default(),
        ]);
        if i < cfg.grids.delta.len() {
            scalar_points.push((cfg.grids.delta[i], est.clone()));
        }
        cells.push(CellSummary {
            deltas: delta.clone(),
            successes: est.successes,
            p_hat: est.p_hat,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            marginal_p: fr.as_ref().map(|f| f.marginal_p.clone()),
            ratio: fr.as_ref().and_then(|f| finite(f.ratio)),
            ratio_ci_lo: fr.as_ref().and_then(|f| finite(f.ci_lo)),
            ratio_ci_hi: fr.as_ref().and_then(|f| finite(f.ci_hi)),
            ratio_upper_one_sided: upper.and_then(finite),
        });
    }
    let (fit, fit_error) = if scalar_points.len() >= 2 {
        match fit_scaling(&scalar_points) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(BlockSummary { n, d, lambdas: lambdas.to_vec(), trials: cfg.trials, failed_trials: samples.failed_trials, ci_level: level, fit, fit_error, cells })
}

fn block_checks(cfg: &ExperimentConfig, b: &BlockSummary, prefix: &str, out: &mut Vec<CheckResult>) {
    let c = &cfg.check;
    let slope = b.fit.as_ref().map_or(f64::NAN, |f| f.slope);
    if let Some(lo) = c.slope_min {
        out.push(CheckResult::at_least(format!("{prefix}slope_min"), slope, lo));
    }
    if let Some(hi) = c.slope_max {
        out.push(CheckResult::at_most(format!("{prefix}slope_max"), slope, hi));
    }
    if let Some(r2) = c.r_squared_min {
        out.push(CheckResult::at_least(format!("{prefix}r_squared_min"), b.fit.as_ref().map_or(f64::NAN, |f| f.r_squared), r2));
    }
    for cell in &b.cells {
        let tag = format!("{prefix}delta={}", cell.deltas.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"));
        if let Some(lo) = c.ratio_min {
            out.push(CheckResult::at_least(format!("{tag}:ratio_ci_lo"), cell.ratio_ci_lo.unwrap_or(f64::NAN), lo));
        }
        if let Some(hi) = c.ratio_max {
            out.push(CheckResult::at_most(format!("{tag}:ratio_ci_hi"), cell.ratio_ci_hi.unwrap_or(f64::NAN), hi));
        }
        if let Some(hi) = c.ratio_upper_max {
            out.push(CheckResult::at_most(format!("{tag}:ratio_upper_one_sided"), cell.ratio_upper_one_sided.unwrap_or(f64::NAN), hi));
        }
    }
}

fn smallball(cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    let loc = cfg.locations.as_ref().ok_or_else(|| ExperimentError::Failed("missing [locations]".into()))?;
    let spec = cfg.ensemble.spec(cfg.master_seed);
    let lambdas = loc.lambdas_for(spec.n);
    let mut table = Table::new(SMALLBALL_HEADER);
    let block = tail_block(cfg, ctx, &spec, &lambdas, &mut table)?;
    let mut checks = Vec::new();
    block_checks(cfg, &block, "", &mut checks);
    Ok(ExperimentOutput {
        failed_trials: block.failed_trials,
        files: vec![OutputFile::csv("smallball.csv", table), OutputFile::json("smallball_fit.json", &block)],
        checks,
    })
}

fn mesoscopic(cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    let loc = cfg.locations.as_ref().ok_or_else(|| ExperimentError::Failed("missing [locations]".into()))?;
    let mut table = Table::new(MESOSCOPIC_HEADER);
    let mut blocks = Vec::new();
    let mut checks = Vec::new();
    let mut failed = 0;
    for n in mesoscopic_n_grid(cfg) {
        let spec = cfg.ensemble.spec(cfg.master_seed).with_n(n);
        let lambdas = mesoscopic_locations(n, loc.center, loc.mesoscopic_d(), loc.delta_sep, loc.sep_exponent);
        let block = tail_block(cfg, ctx, &spec, &lambdas, &mut table)?;
        block_checks(cfg, &block, &format!("n={n}:"), &mut checks);
        failed += block.failed_trials;
        blocks.push(block);
    }
    #[derive(Serialize)]
    struct Summary {
        center: f64,
        delta_sep: f64,
        sep_exponent: f64,
        blocks: Vec<BlockSummary>,
    }
    let summary = Summary { center: loc.center, delta_sep: loc.delta_sep, sep_exponent: loc.sep_exponent, blocks };
    Ok(ExperimentOutput {
        files: vec![OutputFile::csv("mesoscopic.csv", table), OutputFile::json("mesoscopic_summary.json", &summary)],
        failed_trials: failed,
        checks,
    })
}

// -------------------------------------------------------------- rigidity

#[derive(Serialize)]
struct LambdaSummary {
    lambda: f64,
    k_lo: usize,
    k_hi: usize,
    sample_count: usize,
    envelope_spread: f64,
    ratio_tail: f64,
    moment_k: usize,
    moments: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct SemicircleSummary {
    n: usize,
    samples: usize,
    median_w1: Option<f64>,
    median_grid_bl: Option<f64>,
}

fn rigidity(cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    let loc = cfg.locations.as_ref().ok_or_else(|| ExperimentError::Failed("missing [locations]".into()))?;
    let spec = cfg.ensemble.spec(cfg.master_seed);
    let n = spec.n;
    let lambdas = loc.lambdas_for(n);
    let k_range = cfg.grids.k_range(n);
    let ps = cfg.grids.moment_orders();
    let grid = cfg.grids.bl_grid_size();

    type TrialOut = (Vec<RigidityTrial>, (f64, f64));
    let per_trial = ctx.pool.map_trials(cfg.trials, |t| -> Result<Option<(u64, TrialOut)>, ExperimentError> {
        let Some(s) = solved(spectrum(ctx.store, &spec, t, false))? else {
            return Ok(None);
        };
        let trials = lambdas.iter().map(|&l| rigidity_trial(&s, l, k_range, k_range.lo)).collect::<Result<Vec<_>, _>>()?;
        let dist = distance_to_semicircle(&s, grid)?;
        Ok(Some((t, (trials, (dist.w1, dist.grid_bl)))))
    });
    let per_trial: Vec<(u64, TrialOut)> = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
    let failed = cfg.trials - per_trial.len() as u64;
    check_budget(failed, cfg.trials)?;

    let mut table = Table::new(RIGIDITY_HEADER);
    let mut lambda_summaries = Vec::new();
    let mut checks = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let trials: Vec<RigidityTrial> = per_trial.iter().map(|(_, (r, _))| r[i].clone()).collect();
        let report = aggregate_rigidity(&trials, n, lambda, k_range, k_range.lo, &ps)?;
        for (j, (lo, hi)) in report.envelope.iter().enumerate() {
            table.push(vec![n.to_string(), fmt_f64(lambda), (k_range.lo + j).to_string(), fmt_f64(*lo), fmt_f64(*hi)]);
        }
        let spread = report.envelope_spread();
        if let Some(max) = cfg.check.envelope_spread_max {
            checks.push(CheckResult::at_most(format!("lambda={lambda}:envelope_spread"), spread, max));
        }
        lambda_summaries.push(LambdaSummary {
            lambda,
            k_lo: k_range.lo,
            k_hi: k_range.hi,
            sample_count: report.sample_count,
            envelope_spread: spread,
            ratio_tail: report.ratio_tail,
            moment_k: report.moment_k,
            moments: report.moment_estimates.iter().map(|m| (m.p, m.mean)).collect(),
        });
    }

    let mut semi = Table::new(SEMICIRCLE_HEADER);
    let mut semi_summaries = Vec::new();
    let semi_grid = if cfg.grids.n.is_empty() { vec![n] } else { cfg.grids.n.clone() };
    let mut failed_total = failed;
    for &m in &semi_grid {
        let dists: Vec<(u64, (f64, f64))> = if m == n {
            per_trial.iter().map(|(t, (_, d))| (*t, *d)).collect()
        } else {
            let spec_m = spec.with_n(m);
            let out = ctx.pool.map_trials(cfg.trials, |t| -> Result<Option<(u64, (f64, f64))>, ExperimentError> {
                let Some(s) = solved(spectrum(ctx.store, &spec_m, t, false))? else {
                    return Ok(None);
                };
                let d = distance_to_semicircle(&s, grid)?;
                Ok(Some((t, (d.w1, d.grid_bl))))
            });
            let out: Vec<_> = out.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
            let f = cfg.trials - out.len() as u64;
            check_budget(f, cfg.trials)?;
            failed_total += f;
            out
        };
        for (t, (w1, bl)) in &dists {
            semi.push(vec![m.to_string(), t.to_string(), fmt_f64(*w1), fmt_f64(*bl)]);
        }
        let w1s: Vec<f64> = dists.iter().map(|(_, d)| d.0).collect();
        let bls: Vec<f64> = dists.iter().map(|(_, d)| d.1).collect();
        semi_summaries.push(SemicircleSummary { n: m, samples: dists.len(), median_w1: median(&w1s), median_grid_bl: median(&bls) });
    }
    let medians: Vec<f64> = semi_summaries.iter().map(|s| s.median_w1.unwrap_or(f64::NAN)).collect();
    if let Some(max) = cfg.check.w1_median_max {
        let last = semi_summaries.iter().max_by_key(|s| s.n).expect("non-empty grid");
        checks.push(CheckResult::at_most(format!("n={}:median_w1", last.n), last.median_w1.unwrap_or(f64::NAN), max));
    }
    if cfg.check.w1_median_decreasing {
        checks.push(CheckResult::flag("median_w1_decreasing", medians.len() >= 2 && medians.windows(2).all(|w| w[1] < w[0])));
    }
    #[derive(Serialize)]
    struct Summary {
        n: usize,
        locations: Vec<LambdaSummary>,
        semicircle: Vec<SemicircleSummary>,
        bl_grid_size: usize,
    }
    let summary = Summary { n, locations: lambda_summaries, semicircle: semi_summaries, bl_grid_size: grid };
    Ok(ExperimentOutput {
        files: vec![
            OutputFile::csv("rigidity.csv", table),
            OutputFile::csv("semicircle.csv", semi),
            OutputFile::json("rigidity_summary.json", &summary),
        ],
        failed_trials: failed_total,
        checks,
    })
}

// ------------------------------------------------------------- relations

fn relations(cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    let rel = cfg.relation.as_ref().ok_or_else(|| ExperimentError::Failed("missing [relation]".into()))?.spec();
    let spec = cfg.ensemble.spec(cfg.master_seed);
    let (scaling, samples) = scaling_vs_n_with(&rel, &cfg.grids.n, cfg.trials, ctx.pool, |n, t| Ok(spectrum(ctx.store, &spec.with_n(n), t, false)?))?;
    let mut table = Table::new(RELATIONS_HEADER);
    for s in &samples {
        let (v, tuple, count) = match &s.result {
            Some(r) => (fmt_f64(r.min_value), join_f64(&r.argmin_tuple), r.tuple_count.to_string()),
            None => (String::new(), String::new(), "0".to_string()),
        };
        table.push(vec![s.n.to_string(), s.sample.to_string(), v, tuple, count]);
    }
    // Samples without an admissible tuple count as 0 for the positivity check.
    let smallest = samples.iter().map(|s| s.result.as_ref().map_or(0.0, |r| r.min_value)).fold(f64::INFINITY, f64::min);
    let mut checks = Vec::new();
    if let Some(lo) = cfg.check.slope_min {
        checks.push(CheckResult::at_least("slope_min", scaling.fit.slope, lo));
    }
    if let Some(hi) = cfg.check.slope_max {
        checks.push(CheckResult::at_most("slope_max", scaling.fit.slope, hi));
    }
    if let Some(r2) = cfg.check.r_squared_min {
        checks.push(CheckResult::at_least("r_squared_min", scaling.fit.r_squared, r2));
    }
    if cfg.check.min_value_positive {
        checks.push(CheckResult::greater("min_value_positive", smallest, 0.0));
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        relation: &'a rmt_lab_core::relations::RelationSpec,
        samples_per_n: u64,
        smallest_min_value: f64,
        #[serde(flatten)]
        scaling: &'a rmt_lab_core::relations::RelationScaling,
    }
    let summary = Summary { relation: &rel, samples_per_n: cfg.trials, smallest_min_value: smallest, scaling: &scaling };
    Ok(ExperimentOutput {
        files: vec![OutputFile::csv("relations.csv", table), OutputFile::json("relations_fit.json", &summary)],
        failed_trials: 0,
        checks,
    })
}

// ---------------------------------------------------------------- oracle

struct OracleRows {
    table: Table,
    json: Vec<serde_json::Value>,
}

impl OracleRows {
    fn metric(&mut self, check: &str, case: &str, metric: &str, value: String) {
        self.table.push(vec![check.into(), case.into(), metric.into(), value]);
    }

    fn float(&mut self, check: &str, case: &str, metric: &str, value: f64) {
        self.metric(check, case, metric, fmt_f64(value));
    }

    fn int(&mut self, check: &str, case: &str, metric: &str, value: u64) {
        self.metric(check, case, metric, value.to_string());
    }

    fn identity(&mut self, check: &str, case: &str, r: &IdentityCheckResult) {
        self.float(check, case, "max_abs_error", r.max_abs_error);
        self.float(check, case, "max_rel_error", r.max_rel_error);
        self.int(check, case, "instances", r.instances);
        self.int(check, case, "skipped", r.skipped);
        self.int(check, case, "worst_seed", r.worst_seed);
    }
}

/// `M` with i.i.d. standard normal entries, seeded.
fn gaussian_matrix(n: usize, seed: u64) -> DenseMatrix {
    DenseMatrix::gaussian(n, n, &mut rng_from_seed(seed))
}

fn oracle(cfg: &ExperimentConfig, ctx: &Context) -> Result<ExperimentOutput, ExperimentError> {
    let o = &cfg.oracle;
    let pool = ctx.pool;
    let mut rows = OracleRows { table: Table::new(ORACLE_HEADER), json: Vec::new() };
    let mut checks = Vec::new();
    for check in OracleCheck::ALL.iter().filter(|c| o.checks.contains(c)) {
        let name = check.name();
        let index = OracleCheck::ALL.iter().position(|c| c == check).expect("listed") as u64;
        let seed = substream(cfg.master_seed, index);
        match check {
            OracleCheck::DistanceIdentity | OracleCheck::SigmaMinBound | OracleCheck::ProductInequality => {
                let (case, result) = match check {
                    OracleCheck::DistanceIdentity => {
                        (format!("n={}", o.distance_n), distance_identity_check(o.distance_n, o.distance_instances, seed, pool))
                    }
                    OracleCheck::SigmaMinBound => (format!("n={}", o.bound_n), sigma_min_distance_bound_check(o.bound_n, o.bound_instances, seed, pool)),
                    _ => (
                        format!("d={},n={}", o.product_d, o.product_n),
                        product_inequality_check(o.product_d, o.product_n, o.product_instances, seed, pool),
                    ),
                };
                match result {
                    Ok(r) => {
                        rows.identity(name, &case, &r);
                        checks.push(CheckResult::at_most(format!("{name}[{case}]"), r.max_rel_error, o.identity_rel_tol));
                        rows.json.push(serde_json::json!({ "check": name, "case": case, "result": r, "passed": r.passes(o.identity_rel_tol) }));
                    }
                    Err(OracleError::TooManySkipped { skipped, instances }) => {
                        rows.int(name, &case, "skipped", skipped);
                        rows.int(name, &case, "instances", instances);
                        checks.push(CheckResult::at_most(format!("{name}[{case}]:skipped_fraction"), skipped as f64 / instances as f64, 0.01));
                        rows.json.push(serde_json::json!({ "check": name, "case": case, "skipped": skipped, "instances": instances, "passed": false }));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            OracleCheck::RegionVolume => {
                for (j, &d) in o.region_d.iter().enumerate() {
                    for r in region_volume_check(d, &o.region_s, o.region_samples, substream(seed, j as u64), pool)? {
                        let case = format!("d={},s={}", r.d, r.s);
                        rows.float(name, &case, "reference", r.reference);
                        rows.float(name, &case, "monte_carlo", r.monte_carlo);
                        rows.float(name, &case, "mc_stderr", r.mc_stderr);
                        rows.int(name, &case, "samples", r.samples);
                        // Within three Monte Carlo standard errors.
                        checks.push(CheckResult::at_most(format!("{name}[{case}]:abs_error"), (r.monte_carlo - r.reference).abs(), 3.0 * r.mc_stderr));
                        rows.json.push(serde_json::json!({ "check": name, "case": case, "result": r, "passed": r.agrees }));
                    }
                }
            }
            OracleCheck::HansonWright => {
                let m = gaussian_matrix(o.hanson_wright_n, substream(seed, 0));
                let t = hanson_wright_check(&m, &EntryDistribution::gaussian(1.0), o.hanson_wright_trials, &o.hanson_wright_t, substream(seed, 1), pool)?;
                let case = format!("n={}", o.hanson_wright_n);
                rows.float(name, &case, "hs_norm", t.hs_norm);
                rows.float(name, &case, "op_norm", t.op_norm);
                for r in &t.rows {
                    rows.float(name, &format!("{case},t={}", r.t), "frequency", r.frequency);
                }
                rows.float(name, &case, "tail_at_four_op", t.tail_at_four_op);
                checks.push(CheckResult::flag(format!("{name}[{case}]:monotone"), t.monotone));
                checks.push(CheckResult::at_most(format!("{name}[{case}]:tail_at_four_op"), t.tail_at_four_op, 0.05));
                rows.json.push(serde_json::json!({ "check": name, "case": case, "result": t, "passed": t.passed }));
            }
            OracleCheck::Decoupling => {
                let n = o.decoupling_n;
                let g = gaussian_matrix(n, substream(seed, 0));
                let m = DenseMatrix::from_rows(n, n, (0..n * n).map(|k| 0.5 * (g.get(k / n, k % n) + g.get(k % n, k / n))).collect());
                let dc = DecouplingConfig {
                    theta: o.decoupling_theta,
                    m,
                    u: vec![0.0; n],
                    entry: EntryDistribution::gaussian(1.0),
                    inner_trials: o.decoupling_inner,
                    outer_trials: o.decoupling_outer,
                    seed: substream(seed, 1),
                };
                let r = decoupling_check(&dc, pool)?;
                let case = format!("n={n},theta={}", o.decoupling_theta);
                rows.float(name, &case, "lhs", r.lhs);
                rows.float(name, &case, "rhs", r.rhs);
                rows.float(name, &case, "margin", r.margin);
                rows.float(name, &case, "margin_stderr", r.margin_stderr);
                rows.float(name, &case, "bias_bound", r.bias_bound);
                checks.push(CheckResult::flag(format!("{name}[{case}]"), r.passed));
                rows.json.push(serde_json::json!({ "check": name, "case": case, "result": r, "passed": r.passed }));
            }
            OracleCheck::OperatorNormTail => {
                let spec = cfg.ensemble.spec(seed);
                let t_grid = if cfg.grids.t.is_empty() { vec![-1.0, -0.5, 0.0, 0.5, 1.0] } else { cfg.grids.t.clone() };
                let table = operator_norm_tail(&spec, o.operator_norm_trials, &t_grid, pool)?;
                let case = format!("n={}", spec.n);
                for r in &table {
                    let c = format!("{case},t={}", r.t);
                    rows.float(name, &c, "threshold", r.threshold);
                    rows.int(name, &c, "exceedances", r.exceedances);
                    rows.float(name, &c, "frequency", r.frequency);
                }
                let mut sorted = table.clone();
                sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
                let monotone = sorted.windows(2).all(|w| w[1].frequency <= w[0].frequency);
                let worst = sorted.iter().filter(|r| r.t >= 0.0).map(|r| r.frequency).fold(0.0, f64::max);
                checks.push(CheckResult::flag(format!("{name}[{case}]:monotone"), monotone));
                checks.push(CheckResult::at_most(format!("{name}[{case}]:frequency_t_nonneg"), worst, 0.05));
                rows.json.push(serde_json::json!({ "check": name, "case": case, "rows": table, "passed": monotone && worst <= 0.05 }));
            }
        }
    }
    Ok(ExperimentOutput {
        files: vec![OutputFile::csv("oracle.csv", rows.table), OutputFile::json("oracle_summary.json", &serde_json::json!({ "checks": rows.json }))],
        failed_trials: 0,
        checks,
    })
}
