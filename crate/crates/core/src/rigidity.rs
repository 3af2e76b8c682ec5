//! Rigidity and local-law diagnostics: envelopes of `k·μ_k(λ)/√n`, inverse
//! moments, and distances between the normalized empirical spectral measure
//! and the semicircle law.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{sample_matrix, EnsembleError, EnsembleSpec};
use crate::exec::TrialExecutor;
use crate::math;
use crate::spectral::{decompose, mu_all, SpectralError, Spectrum};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigidityError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("no samples to aggregate")]
    EmptyReport,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Semicircle density `(1/2π)·√((4 − x²)₊)`.
pub fn semicircle_density(x: f64) -> f64 {
    let r = 4.0 - x * x;
    if r <= 0.0 {
        0.0
    } else {
        math::sqrt(r) / (2.0 * math::PI)
    }
}

/// Semicircle distribution function.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * math::sqrt(4.0 - x * x) / (4.0 * math::PI) + math::asin(x / 2.0) / math::PI
    }
}

/// `∫_{-2}^{x} t ρ_sc(t) dt`.
fn semicircle_partial_mean(x: f64) -> f64 {
    if x <= -2.0 || x >= 2.0 {
        0.0
    } else {
        let r = 4.0 - x * x;
        -r * math::sqrt(r) / (6.0 * math::PI)
    }
}

/// `∫_{-∞}^{x} F_sc(t) dt`.
fn semicircle_cdf_integral(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        x
    } else {
        x * semicircle_cdf(x) - semicircle_partial_mean(x)
    }
}

/// Semicircle quantile by bisection (`F_sc` is strictly increasing on
/// `[-2, 2]`).
pub fn semicircle_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return -2.0;
    }
    if u >= 1.0 {
        return 2.0;
    }
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if semicircle_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `∫_a^b |c − F_sc(x)| dx` for constant `c`.
fn abs_cdf_gap(a: f64, b: f64, c: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let g = semicircle_cdf_integral;
    let cross = semicircle_quantile(c).clamp(a, b);
    let below = c * (cross - a) - (g(cross) - g(a));
    let above = (g(b) - g(cross)) - c * (b - cross);
    below.max(0.0) + above.max(0.0)
}

/// Exact 1-Wasserstein distance between the uniform measure on `points` and
/// the semicircle law, as `∫ |F_n − F_sc|` evaluated piecewise with closed
/// forms.
pub fn wasserstein1_to_semicircle(points: &[f64]) -> f64 {
    let mut y = points.to_vec();
    y.sort_by(f64::total_cmp);
    let m = y.len();
    if m == 0 {
        return 0.0;
    }
    let mf = m as f64;
    let mut total = 0.0;
    // Left tail: F_n = 0.
    let left_end = y[0];
    total += abs_cdf_gap(left_end.min(-2.0), left_end, 0.0);
    for k in 1..m {
        total += abs_cdf_gap(y[k - 1], y[k], k as f64 / mf);
    }
    let right_start = y[m - 1];
    total += abs_cdf_gap(right_start, right_start.max(2.0), 1.0);
    total
}

/// Exact 1-Wasserstein distance between two empirical (uniform) measures.
pub fn wasserstein1_empirical(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut x_prev: Option<f64> = None;
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i] <= b[j]);
        let x = if take_a { a[i] } else { b[j] };
        if let Some(p) = x_prev {
            let fa = i as f64 / na;
            let fb = j as f64 / nb;
            total += math::abs(fa - fb) * (x - p);
        }
        if take_a {
            i += 1;
        } else {
            j += 1;
        }
        x_prev = Some(x);
    }
    total
}

/// Uniform grid on `[-GRID_HALF_WIDTH, GRID_HALF_WIDTH]` for the
/// bounded-Lipschitz approximation.
pub const GRID_HALF_WIDTH: f64 = 3.0;

fn grid_step(grid_size: usize) -> f64 {
    2.0 * GRID_HALF_WIDTH / (grid_size - 1) as f64
}

/// Hat-function weights of an empirical measure on the grid. Mass outside
/// the grid goes to the nearest end node.
pub fn grid_weights_empirical(points: &[f64], grid_size: usize) -> Vec<f64> {
    let h = grid_step(grid_size);
    let mut w = vec![0.0; grid_size];
    let unit = 1.0 / points.len() as f64;
    for &y in points {
        let t = ((y + GRID_HALF_WIDTH) / h).clamp(0.0, (grid_size - 1) as f64);
        let i = (t as usize).min(grid_size - 2);
        let frac = t - i as f64;
        w[i] += unit * (1.0 - frac);
        w[i + 1] += unit * frac;
    }
    w
}

/// Hat-function weights of the semicircle law, from closed-form cell
/// integrals of `ρ_sc` and `x·ρ_sc`.
pub fn grid_weights_semicircle(grid_size: usize) -> Vec<f64> {
    let h = grid_step(grid_size);
    let mut w = vec![0.0; grid_size];
    for i in 0..grid_size - 1 {
        let a = -GRID_HALF_WIDTH + i as f64 * h;
        let b = a + h;
        let mass = semicircle_cdf(b) - semicircle_cdf(a);
        let first = semicircle_partial_mean(b) - semicircle_partial_mean(a);
        let right = (first - a * mass) / h;
        w[i] += mass - right;
        w[i + 1] += right;
    }
    w
}

/// Concave piecewise-linear function on an interval, as breakpoints.
struct Concave {
    pts: Vec<(f64, f64)>,
}

impl Concave {
    fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.pts.iter().enumerate() {
            if p.1 > self.pts[best].1 {
                best = i;
            }
        }
        best
    }

    fn value_at(pts: &[(f64, f64)], x: f64) -> f64 {
        let k = pts.partition_point(|p| p.0 < x);
        if k == 0 {
            return pts[0].1;
        }
        if k >= pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        if x1 == x0 {
            return y1.max(y0);
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `s ↦ max_{|t−s|≤r, |t|≤m} V(t)` restricted to `|s| ≤ m`.
    fn window_max(&self, r: f64, m: f64) -> Self {
        let star = self.argmax();
        let mut shifted: Vec<(f64, f64)> = Vec::with_capacity(self.pts.len() + 2);
        for (i, &(x, v)) in self.pts.iter().enumerate() {
            if i < star {
                shifted.push((x - r, v));
            } else if i == star {
                shifted.push((x - r, v));
                shifted.push((x + r, v));
            } else {
                shifted.push((x + r, v));
            }
        }
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(shifted.len());
        out.push((-m, Self::value_at(&shifted, -m)));
        for &(x, v) in &shifted {
            if x > -m && x < m {
                out.push((x, v));
            }
        }
        out.push((m, Self::value_at(&shifted, m)));
        Self { pts: out }
    }

    fn add_linear(&mut self, slope: f64) {
        for p in &mut self.pts {
            p.1 += slope * p.0;
        }
    }

    fn max(&self) -> f64 {
        self.pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `max Σ f_i w_i` over grid functions with `|f_i| ≤ sup_cap` and
/// `|f_{i+1} − f_i| ≤ step_cap`. The value function is propagated along the
/// grid as a concave piecewise-linear function.
fn chain_lp(w: &[f64], sup_cap: f64, step_cap: f64) -> f64 {
    if sup_cap <= 0.0 {
        return 0.0;
    }
    let mut v = Concave { pts: vec![(-sup_cap, -sup_cap * w[0]), (sup_cap, sup_cap * w[0])] };
    for &wi in &w[1..] {
        v = v.window_max(step_cap, sup_cap);
        v.add_linear(wi);
    }
    v.max()
}

/// Bounded-Lipschitz distance restricted to piecewise-linear test functions
/// on the grid, with `‖f‖_L = Lip(f) + sup|f| ≤ 1`. `diff` holds grid weights
/// of `μ − ν`.
///
/// The optimum over a fixed split `Lip = L`, `sup = 1 − L` is concave in `L`,
/// so the split is found by golden-section search.
pub fn bounded_lipschitz_grid(diff: &[f64], h: f64) -> f64 {
    if diff.len() < 2 {
        return 0.0;
    }
    let value = |l: f64| chain_lp(diff, 1.0 - l, l * h);
    let phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (value(c), value(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = value(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = value(d);
        }
    }
    fc.max(fd).max(value(0.0)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicircleDistance {
    pub n: usize,
    pub w1: f64,
    pub grid_bl: f64,
    pub grid_size: usize,
}

/// Distances between the empirical measure of `eigenvalues/√n` and `ρ_sc`.
pub fn distance_to_semicircle(spectrum: &Spectrum, grid_size: usize) -> Result<SemicircleDistance, RigidityError> {
    if grid_size < 16 {
        return Err(RigidityError::InvalidParameter("grid_size must be at least 16"));
    }
    let points = spectrum.normalized();
    let w1 = wasserstein1_to_semicircle(&points);
    let we = grid_weights_empirical(&points, grid_size);
    let ws = grid_weights_semicircle(grid_size);
    let diff: Vec<f64> = we.iter().zip(&ws).map(|(a, b)| a - b).collect();
    let grid_bl = bounded_lipschitz_grid(&diff, grid_step(grid_size));
    Ok(SemicircleDistance { n: spectrum.n, w1, grid_bl, grid_size })
}

/// Per-trial rigidity statistics at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityTrial {
    /// `k·μ_k(λ)/√n` for `k` in the configured range.
    pub scaled_mu: Vec<f64>,
    /// `μ_{k_hi}(λ)/μ_1(λ)`.
    pub tail_ratio: f64,
    /// `√n/(k·μ_k(λ))` at the moment index.
    pub inverse_at_moment_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

impl KRange {
    /// `[n/10, n/3]`.
    pub fn default_for(n: usize) -> Self {
        Self { lo: (n / 10).max(1), hi: (n / 3).max(1) }
    }

    fn check(&self, n: usize) -> Result<(), RigidityError> {
        if self.lo == 0 || self.lo > self.hi || self.hi > n {
            return Err(RigidityError::InvalidParameter("k range must satisfy 1 <= lo <= hi <= n"));
        }
        Ok(())
    }
}

/// Threshold on `μ_k/μ_1` tracked by [`RigidityReport::ratio_tail`].
pub const RATIO_TAIL_THRESHOLD: f64 = 1e-2;

pub fn rigidity_trial(spectrum: &Spectrum, lambda: f64, k_range: KRange, moment_k: usize) -> Result<RigidityTrial, RigidityError> {
    let n = spectrum.n;
    k_range.check(n)?;
    if moment_k == 0 || moment_k > n {
        return Err(RigidityError::InvalidParameter("moment k outside 1..=n"));
    }
    let mus = mu_all(spectrum, lambda)?;
    let sn = math::sqrt(n as f64);
    let scaled_mu = (k_range.lo..=k_range.hi).map(|k| k as f64 * mus[k - 1] / sn).collect();
    Ok(RigidityTrial {
        scaled_mu,
        tail_ratio: mus[k_range.hi - 1] / mus[0],
        inverse_at_moment_k: sn / (moment_k as f64 * mus[moment_k - 1]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub n: usize,
    pub sample_count: usize,
    pub lambda: f64,
    pub k_range: KRange,
    /// Per `k` in range: `(min, max)` over samples of `k·μ_k/√n`.
    pub envelope: Vec<(f64, f64)>,
    /// Frequency of `μ_{k_hi}/μ_1 ≥ 0.01`.
    pub ratio_tail: f64,
    pub moment_k: usize,
    pub moment_estimates: Vec<MomentEstimate>,
}

impl RigidityReport {
    /// Global max over global min of the envelope.
    pub fn envelope_spread(&self) -> f64 {
        let lo = self.envelope.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = self.envelope.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        hi / lo
    }
}

/// Aggregate per-trial statistics. Only min/max/sum reductions are used, so
/// the result does not depend on trial order beyond float summation order of
/// the moments, which is fixed by the slice order.
pub fn aggregate_rigidity(
    trials: &[RigidityTrial],
    n: usize,
    lambda: f64,
    k_range: KRange,
    moment_k: usize,
    moment_ps: &[f64],
) -> Result<RigidityReport, RigidityError> {
    if trials.is_empty() {
        return Err(RigidityError::EmptyReport);
    }
    let width = k_range.hi - k_range.lo + 1;
    let mut envelope = vec![(f64::INFINITY, f64::NEG_INFINITY); width];
    let mut tail_hits = 0usize;
    for t in trials {
        for (e, v) in envelope.iter_mut().zip(&t.scaled_mu) {
            e.0 = e.0.min(*v);
            e.1 = e.1.max(*v);
        }
        if t.tail_ratio >= RATIO_TAIL_THRESHOLD {
            tail_hits += 1;
        }
    }
    let m = trials.len() as f64;
    let moment_estimates = moment_ps
        .iter()
        .map(|&p| MomentEstimate { p, mean: trials.iter().map(|t| math::powf(t.inverse_at_moment_k, p)).sum::<f64>() / m })
        .collect();
    Ok(RigidityReport {
        n,
        sample_count: trials.len(),
        lambda,
        k_range,
        envelope,
        ratio_tail: tail_hits as f64 / m,
        moment_k,
        moment_estimates,
    })
}

/// Envelope report from precomputed spectra (all of order `n`).
pub fn envelope_from_spectra(
    spectra: &[Spectrum],
    lambda: f64,
    k_range: KRange,
    moment_ps: &[f64],
) -> Result<RigidityReport, RigidityError> {
    let n = spectra.first().ok_or(RigidityError::EmptyReport)?.n;
    let trials = spectra
        .iter()
        .map(|s| rigidity_trial(s, lambda, k_range, k_range.lo))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_rigidity(&trials, n, lambda, k_range, k_range.lo, moment_ps)
}

/// Sample `sample_count` matrices and report the envelope of `k·μ_k(λ)/√n`.
/// Moments are taken at `k = k_range.lo`.
pub fn envelope_report<E: TrialExecutor>(
    spec: &EnsembleSpec,
    lambda: f64,
    k_range: KRange,
    sample_count: usize,
    moment_ps: &[f64],
    exec: &E,
) -> Result<RigidityReport, RigidityError> {
    if sample_count == 0 {
        return Err(RigidityError::EmptyReport);
    }
    spec.validate()?;
    k_range.check(spec.n)?;
    let trials = exec
        .map_trials(sample_count as u64, |t| -> Result<RigidityTrial, RigidityError> {
            let m = sample_matrix(spec, t)?;
            let s = decompose(&m, false)?;
            rigidity_trial(&s, lambda, k_range, k_range.lo)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_rigidity(&trials, spec.n, lambda, k_range, k_range.lo, moment_ps)
}

/// Mean of `(√n/(k·μ_k(λ)))^p` over precomputed spectra.
pub fn moment_from_spectra(spectra: &[Spectrum], lambda: f64, k: usize, p: f64) -> Result<f64, RigidityError> {
    if spectra.is_empty() {
        return Err(RigidityError::EmptyReport);
    }
    if !(p >= 1.0) {
        return Err(RigidityError::InvalidParameter("p must be at least 1"));
    }
    let mut sum = 0.0;
    for s in spectra {
        let r = KRange { lo: k, hi: k };
        sum += math::powf(rigidity_trial(s, lambda, r, k)?.inverse_at_moment_k, p);
    }
    Ok(sum / spectra.len() as f64)
}

/// Monte Carlo estimate of `E[(√n/(k·μ_k(λ)))^p]`, using trials
/// `first_trial..first_trial+sample_count` of the ensemble.
pub fn moment_check<E: TrialExecutor>(
    spec: &EnsembleSpec,
    lambda: f64,
    k: usize,
    p: f64,
    sample_count: usize,
    first_trial: u64,
    exec: &E,
) -> Result<f64, RigidityError> {
    if sample_count == 0 {
        return Err(RigidityError::EmptyReport);
    }
    if !(p >= 1.0) {
        return Err(RigidityError::InvalidParameter("p must be at least 1"));
    }
    spec.validate()?;
    if k == 0 || k > spec.n {
        return Err(RigidityError::InvalidParameter("k outside 1..=n"));
    }
    let values = exec
        .map_trials(sample_count as u64, |t| -> Result<f64, RigidityError> {
            let m = sample_matrix(spec, first_trial + t)?;
            let s = decompose(&m, false)?;
            let r = KRange { lo: k, hi: k };
            Ok(math::powf(rigidity_trial(&s, lambda, r, k)?.inverse_at_moment_k, p))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// W1 distance to the semicircle for each of `sample_count` trials.
pub fn semicircle_w1_samples<E: TrialExecutor>(
    spec: &EnsembleSpec,
    sample_count: usize,
    exec: &E,
) -> Result<Vec<f64>, RigidityError> {
    spec.validate()?;
    exec.map_trials(sample_count as u64, |t| -> Result<f64, RigidityError> {
        let m = sample_matrix(spec, t)?;
        let s = decompose(&m, false)?;
        Ok(wasserstein1_to_semicircle(&s.normalized()))
    })
    .into_iter()
    .collect()
}
