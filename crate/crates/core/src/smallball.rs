//! Small-ball probabilities of least singular values at one or several
//! locations.
//!
//! Each trial costs one values-only eigendecomposition; `σ_min(A − λI)` for
//! every location is then a nearest-eigenvalue lookup, so every threshold
//! vector in a grid is evaluated on the same sample set.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{sample_matrix, EnsembleError, EnsembleSpec};
use crate::exec::TrialExecutor;
use crate::math;
use crate::spectral::{decompose, required_separation, sigma_min_at, LocationSet, SpectralError, Spectrum};
pub use crate::stats::ScalingFit;
use crate::stats::{fit_loglog, two_sided_z, wilson_interval, StatsError};

/// Largest tolerated share of failed eigendecompositions.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Largest number of locations handled by one tally (`2^d` patterns).
pub const MAX_LOCATIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmallBallError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{failed} of {trials} trials failed to decompose, above the 0.1% budget")]
    FailureBudgetExceeded { failed: u64, trials: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallConfig {
    pub ensemble: EnsembleSpec,
    pub locations: LocationSet,
    /// One threshold vector per row; the event at location `i` is
    /// `σ_min(A − λ_i I) ≤ δ_i/√n`.
    pub delta_grid: Vec<Vec<f64>>,
    pub trials: u64,
    pub ci_level: f64,
}

impl SmallBallConfig {
    pub fn validate(&self) -> Result<(), SmallBallError> {
        self.ensemble.validate()?;
        let d = self.locations.d();
        if d == 0 || d > MAX_LOCATIONS {
            return Err(SmallBallError::InvalidConfig("need between 1 and 16 locations"));
        }
        if self.trials == 0 {
            return Err(SmallBallError::InvalidConfig("trials must be positive"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(SmallBallError::InvalidConfig("ci_level must lie in (0, 1)"));
        }
        for row in &self.delta_grid {
            if row.len() != d {
                return Err(SmallBallError::InvalidConfig("each delta vector needs one entry per location"));
            }
            if row.iter().any(|x| !(*x > 0.0)) {
                return Err(SmallBallError::InvalidConfig("thresholds must be positive"));
            }
        }
        Ok(())
    }
}

/// Counts of every success pattern over a trial set. Bit `i` of a pattern is
/// the event at location `i`. Merging tallies is plain addition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTally {
    pub d: usize,
    pub trials: u64,
    pub patterns: Vec<u64>,
}

impl EventTally {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1 && d <= MAX_LOCATIONS);
        Self { d, trials: 0, patterns: vec![0; 1 << d] }
    }

    pub fn record(&mut self, hits: &[bool]) {
        debug_assert_eq!(hits.len(), self.d);
        let mut mask = 0usize;
        for (i, h) in hits.iter().enumerate() {
            if *h {
                mask |= 1 << i;
            }
        }
        self.patterns[mask] += 1;
        self.trials += 1;
    }

    pub fn from_indicators<'a, I: IntoIterator<Item = &'a [bool]>>(d: usize, rows: I) -> Self {
        let mut t = Self::new(d);
        for r in rows {
            t.record(r);
        }
        t
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.d, other.d);
        self.trials += other.trials;
        for (a, b) in self.patterns.iter_mut().zip(&other.patterns) {
            *a += b;
        }
    }

    pub fn joint(&self) -> u64 {
        self.patterns[(1 << self.d) - 1]
    }

    pub fn marginal(&self, i: usize) -> u64 {
        self.patterns.iter().enumerate().filter(|(m, _)| m & (1 << i) != 0).map(|(_, c)| c).sum()
    }

    pub fn estimate(&self, level: f64, failed_trials: u64) -> Result<TailEstimate, SmallBallError> {
        let successes = self.joint();
        let (ci_lo, ci_hi) = wilson_interval(successes, self.trials, level)?;
        Ok(TailEstimate {
            successes,
            trials: self.trials,
            p_hat: successes as f64 / self.trials as f64,
            ci_lo,
            ci_hi,
            per_location_successes: (0..self.d).map(|i| self.marginal(i)).collect(),
            failed_trials,
        })
    }

    /// `p_joint / Π p_i` with a delta-method interval on the log scale.
    ///
    /// The log-ratio estimator has influence function
    /// `ψ = 1_J/p_J − Σ_i 1_i/p_i` per trial; its variance is computed
    /// exactly from the pattern counts.
    pub fn factorization(&self, level: f64) -> Result<FactorizationRatio, SmallBallError> {
        if self.trials == 0 {
            return Err(SmallBallError::InvalidConfig("empty tally"));
        }
        let t = self.trials as f64;
        let marginals: Vec<f64> = (0..self.d).map(|i| self.marginal(i) as f64 / t).collect();
        let joint = self.joint() as f64 / t;
        let product: f64 = marginals.iter().product();
        if marginals.iter().any(|p| *p == 0.0) {
            return Ok(FactorizationRatio {
                ratio: f64::NAN,
                ci_lo: f64::NAN,
                ci_hi: f64::NAN,
                defined: false,
                joint_p: joint,
                marginal_p: marginals,
            });
        }
        let ratio = joint / product;
        let z = two_sided_z(level);
        if joint == 0.0 {
            let (_, hi) = wilson_interval(0, self.trials, level)?;
            return Ok(FactorizationRatio {
                ratio: 0.0,
                ci_lo: 0.0,
                ci_hi: hi / product,
                defined: true,
                joint_p: joint,
                marginal_p: marginals,
            });
        }
        let full = (1usize << self.d) - 1;
        let mut mean = 0.0;
        let mut second = 0.0;
        for (mask, &count) in self.patterns.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let mut psi = if mask == full { 1.0 / joint } else { 0.0 };
            for (i, p) in marginals.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    psi -= 1.0 / p;
                }
            }
            let w = count as f64 / t;
            mean += w * psi;
            second += w * psi * psi;
        }
        let var = (second - mean * mean).max(0.0);
        let se = math::sqrt(var / t);
        let log_r = math::ln(ratio);
        Ok(FactorizationRatio {
            ratio,
            ci_lo: math::exp(log_r - z * se),
            ci_hi: math::exp(log_r + z * se),
            defined: true,
            joint_p: joint,
            marginal_p: marginals,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub per_location_successes: Vec<u64>,
    /// Trials excluded because the eigensolver failed.
    pub failed_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationRatio {
    /// NaN when some marginal estimate is 0.
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub defined: bool,
    pub joint_p: f64,
    pub marginal_p: Vec<f64>,
}

/// `σ_min(A − λ_i I)` for every location in every completed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallBallSamples {
    pub n: usize,
    pub lambdas: Vec<f64>,
    /// Row-major, `d` values per completed trial.
    pub sigma_mins: Vec<f64>,
    pub failed_trials: u64,
}

impl SmallBallSamples {
    pub fn completed_trials(&self) -> usize {
        self.sigma_mins.len() / self.lambdas.len()
    }

    pub fn tally(&self, delta: &[f64]) -> EventTally {
        let d = self.lambdas.len();
        assert_eq!(delta.len(), d);
        let sn = math::sqrt(self.n as f64);
        let thresholds: Vec<f64> = delta.iter().map(|x| x / sn).collect();
        let mut tally = EventTally::new(d);
        let mut hits = vec![false; d];
        for row in self.sigma_mins.chunks_exact(d) {
            for i in 0..d {
                hits[i] = row[i] <= thresholds[i];
            }
            tally.record(&hits);
        }
        tally
    }

    pub fn estimate(&self, delta: &[f64], level: f64) -> Result<TailEstimate, SmallBallError> {
        self.tally(delta).estimate(level, self.failed_trials)
    }

    pub fn factorization(&self, delta: &[f64], level: f64) -> Result<FactorizationRatio, SmallBallError> {
        self.tally(delta).factorization(level)
    }
}

/// Run `trials` decompositions of `ensemble` and record `σ_min` at each
/// location.
pub fn collect_samples<E: TrialExecutor>(
    ensemble: &EnsembleSpec,
    lambdas: &[f64],
    trials: u64,
    exec: &E,
) -> Result<SmallBallSamples, SmallBallError> {
    ensemble.validate()?;
    collect_samples_from(ensemble.n, lambdas, trials, exec, |t| {
        let m = sample_matrix(ensemble, t)?;
        Ok(decompose(&m, false))
    })
}

/// As [`collect_samples`], with spectra supplied by `source` (e.g. a cache).
/// An `Ok(Err(_))` from the source counts as a failed trial; an outer `Err`
/// aborts.
pub fn collect_samples_from<E, S>(n: usize, lambdas: &[f64], trials: u64, exec: &E, source: S) -> Result<SmallBallSamples, SmallBallError>
where
    E: TrialExecutor,
    S: Fn(u64) -> Result<Result<Spectrum, SpectralError>, SmallBallError> + Sync + Send,
{
    if lambdas.is_empty() || lambdas.len() > MAX_LOCATIONS {
        return Err(SmallBallError::InvalidConfig("need between 1 and 16 locations"));
    }
    if trials == 0 {
        return Err(SmallBallError::InvalidConfig("trials must be positive"));
    }
    let rows = exec.map_trials(trials, |t| -> Result<Option<Vec<f64>>, SmallBallError> {
        Ok(source(t)?.ok().map(|s| lambdas.iter().map(|&l| sigma_min_at(&s, l)).collect()))
    });
    let mut sigma_mins = Vec::with_capacity(trials as usize * lambdas.len());
    let mut failed = 0u64;
    for r in rows {
        match r? {
            Some(v) => sigma_mins.extend(v),
            None => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * trials as f64 {
        return Err(SmallBallError::FailureBudgetExceeded { failed, trials });
    }
    Ok(SmallBallSamples { n, lambdas: lambdas.to_vec(), sigma_mins, failed_trials: failed })
}

/// Joint small-ball estimate for one threshold vector.
pub fn estimate_joint<E: TrialExecutor>(config: &SmallBallConfig, delta: &[f64], exec: &E) -> Result<TailEstimate, SmallBallError> {
    if delta.len() != config.locations.d() {
        return Err(SmallBallError::InvalidConfig("delta needs one entry per location"));
    }
    let samples = collect_samples(&config.ensemble, &config.locations.lambdas, config.trials, exec)?;
    samples.estimate(delta, config.ci_level)
}

/// Estimates for every row of `config.delta_grid`, all from one trial set.
pub fn estimate_grid<E: TrialExecutor>(config: &SmallBallConfig, exec: &E) -> Result<(SmallBallSamples, Vec<TailEstimate>), SmallBallError> {
    config.validate()?;
    let samples = collect_samples(&config.ensemble, &config.locations.lambdas, config.trials, exec)?;
    let estimates = config
        .delta_grid
        .iter()
        .map(|delta| samples.estimate(delta, config.ci_level))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((samples, estimates))
}

/// Factorization ratio for one threshold vector; needs `d ≥ 2`.
pub fn factorization_ratio<E: TrialExecutor>(config: &SmallBallConfig, delta: &[f64], exec: &E) -> Result<FactorizationRatio, SmallBallError> {
    if config.locations.d() < 2 {
        return Err(SmallBallError::InvalidConfig("factorization needs at least two locations"));
    }
    if delta.len() != config.locations.d() {
        return Err(SmallBallError::InvalidConfig("delta needs one entry per location"));
    }
    let samples = collect_samples(&config.ensemble, &config.locations.lambdas, config.trials, exec)?;
    samples.factorization(delta, config.ci_level)
}

/// Log-log least squares of `p_hat` against the scalar threshold. Cells with
/// zero successes are excluded and counted in `points_excluded`.
pub fn fit_scaling(points: &[(f64, TailEstimate)]) -> Result<ScalingFit, SmallBallError> {
    let xy: Vec<(f64, f64)> = points.iter().map(|(delta, est)| (*delta, est.p_hat)).collect();
    Ok(fit_loglog(&xy)?)
}

/// Locations for the mesoscopic experiment: `d` points centred on
/// `center·√n`, consecutive gaps exactly `Δ·n^{σ−1/2}`.
pub fn mesoscopic_locations(n: usize, center: f64, d: usize, delta_sep: f64, sep_exponent: f64) -> Vec<f64> {
    let gap = required_separation(n, delta_sep, sep_exponent);
    let mid = (d as f64 - 1.0) / 2.0;
    let c = center * math::sqrt(n as f64);
    (0..d).map(|i| c + (i as f64 - mid) * gap).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoscopicConfig {
    /// Ensemble template; `n` is taken from `n_grid`.
    pub ensemble: EnsembleSpec,
    pub n_grid: Vec<usize>,
    /// Centre of the location cluster on the normalized scale.
    pub center: f64,
    pub d: usize,
    pub kappa: f64,
    pub delta_sep: f64,
    pub sep_exponent: f64,
    pub delta_grid: Vec<Vec<f64>>,
    pub trials: u64,
    pub ci_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoscopicRow {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub estimate: TailEstimate,
    pub factorization: Option<FactorizationRatio>,
}

/// Joint estimates across an `n` grid with locations at the minimal
/// mesoscopic separation.
pub fn mesoscopic_experiment<E: TrialExecutor>(config: &MesoscopicConfig, exec: &E) -> Result<Vec<MesoscopicRow>, SmallBallError> {
    if config.n_grid.is_empty() {
        return Err(SmallBallError::InvalidConfig("n grid is empty"));
    }
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let lambdas = mesoscopic_locations(n, config.center, config.d, config.delta_sep, config.sep_exponent);
        let locations = LocationSet::new(lambdas, config.kappa, config.delta_sep, config.sep_exponent, n)
            .map_err(|_| SmallBallError::InvalidConfig("mesoscopic locations violate bulk or separation bounds"))?;
        let sb = SmallBallConfig {
            ensemble: config.ensemble.with_n(n),
            locations,
            delta_grid: config.delta_grid.clone(),
            trials: config.trials,
            ci_level: config.ci_level,
        };
        let (samples, estimates) = estimate_grid(&sb, exec)?;
        for (delta, estimate) in sb.delta_grid.iter().zip(estimates) {
            let factorization = if config.d >= 2 { Some(samples.factorization(delta, config.ci_level)?) } else { None };
            rows.push(MesoscopicRow { n, lambdas: sb.locations.lambdas.clone(), deltas: delta.clone(), estimate, factorization });
        }
    }
    Ok(rows)
}
