//! Numeric checks of the identities and auxiliary inequalities behind the
//! small-ball arguments.
//!
//! Every instance is generated from its own seed, so the seed reported for
//! the worst instance regenerates it through the matching `*_instance`
//! function.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::symmetric_eigen;
use crate::ensemble::{sample_matrix, EnsembleError, EnsembleSpec, EntryDistribution, SampledMatrix};
use crate::exec::TrialExecutor;
use crate::linalg::{column_distance_to_span, norm2, sigma_max, sigma_min, singular_values, DenseMatrix};
use crate::math;
use crate::rng::{rng_from_seed, substream, trial_seed};
use crate::spectral::{decompose, operator_norm, SpectralError};

/// Instances whose minor `B` has condition number above this are skipped.
pub const CONDITION_CUTOFF: f64 = 1e12;

/// Largest tolerated share of skipped instances.
pub const MAX_SKIP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("{skipped} of {instances} instances skipped as numerically singular")]
    TooManySkipped { skipped: u64, instances: u64 },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheckResult {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub instances: u64,
    pub worst_seed: u64,
    pub skipped: u64,
}

impl IdentityCheckResult {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_error <= rel_tol
    }
}

/// Per-instance outcome: absolute and relative discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceError {
    pub abs: f64,
    pub rel: f64,
}

fn reduce(results: Vec<(u64, Option<InstanceError>)>) -> IdentityCheckResult {
    let mut out = IdentityCheckResult { max_abs_error: 0.0, max_rel_error: 0.0, instances: results.len() as u64, worst_seed: 0, skipped: 0 };
    let mut first = true;
    for (seed, r) in results {
        match r {
            None => out.skipped += 1,
            Some(e) => {
                if first || e.rel > out.max_rel_error {
                    out.max_rel_error = e.rel;
                    out.worst_seed = seed;
                    first = false;
                }
                out.max_abs_error = out.max_abs_error.max(e.abs);
            }
        }
    }
    out
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = math::abs(a).max(math::abs(b));
    if scale == 0.0 {
        0.0
    } else {
        math::abs(a - b) / scale
    }
}

/// Symmetric matrix with standard normal entries (diagonal included).
pub fn random_symmetric(n: usize, seed: u64) -> SampledMatrix {
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample(StandardNormal);
            data[i * n + j] = x;
            data[j * n + i] = x;
        }
    }
    SampledMatrix { n, data, trial_index: 0, trial_seed: seed }
}

fn as_dense(m: &SampledMatrix) -> DenseMatrix {
    DenseMatrix::from_rows(m.n, m.n, m.data.clone())
}

/// Both sides of the distance identity for column 1:
/// the projection distance of `A_1` to the span of the other columns, and
/// `|⟨B⁻¹X, X⟩ − a₁₁| / √(1 + ‖B⁻¹X‖²)` with `B` the trailing minor and `X`
/// the rest of the first column. `None` when `B` is numerically singular.
pub fn distance_identity_sides(a: &SampledMatrix) -> Result<Option<(f64, f64)>, OracleError> {
    let n = a.n;
    if n < 2 {
        return Err(OracleError::InvalidInput("distance identity needs n >= 2"));
    }
    let projection = column_distance_to_span(&as_dense(a), 0);
    let b = a.trailing_minor(1);
    let m = n - 1;
    let x: Vec<f64> = (1..n).map(|i| a.get(i, 0)).collect();
    let eig = symmetric_eigen(&b.data, m, true).map_err(|_| SpectralError::SolverFailure { seed: a.trial_seed })?;
    let (lo, hi) = eig.values.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(math::abs(*e)), hi.max(math::abs(*e))));
    if lo == 0.0 || hi / lo > CONDITION_CUTOFF {
        return Ok(None);
    }
    // B⁻¹X = V diag(1/e) Vᵀ X
    let vecs = eig.vectors.as_ref().expect("vectors requested");
    let mut y = vec![0.0; m];
    for k in 0..m {
        let v = &vecs[k * m..(k + 1) * m];
        let c: f64 = v.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() / eig.values[k];
        for i in 0..m {
            y[i] += c * v[i];
        }
    }
    let quad: f64 = y.iter().zip(&x).map(|(p, q)| p * q).sum();
    let ny = norm2(&y);
    let formula = math::abs(quad - a.get(0, 0)) / math::sqrt(1.0 + ny * ny);
    Ok(Some((projection, formula)))
}

pub fn distance_identity_instance(n: usize, seed: u64) -> Result<Option<InstanceError>, OracleError> {
    let a = random_symmetric(n, seed);
    Ok(distance_identity_sides(&a)?.map(|(p, f)| InstanceError { abs: math::abs(p - f), rel: rel_diff(p, f) }))
}

/// Projection distance against the quadratic-form formula on random
/// symmetric matrices. Fails if more than 1% of instances are skipped.
pub fn distance_identity_check<E: TrialExecutor>(n: usize, instances: u64, seed: u64, exec: &E) -> Result<IdentityCheckResult, OracleError> {
    if n < 2 || instances == 0 {
        return Err(OracleError::InvalidInput("need n >= 2 and at least one instance"));
    }
    let results = exec.map_trials(instances, |i| {
        let s = trial_seed(seed, i);
        distance_identity_instance(n, s).map(|r| (s, r))
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let out = reduce(results);
    if out.skipped as f64 >= MAX_SKIP_FRACTION * instances as f64 && out.skipped > 0 {
        return Err(OracleError::TooManySkipped { skipped: out.skipped, instances });
    }
    Ok(out)
}

/// Largest violation of `σ_min(M) ≥ |v_j|·d_j(M)` over `j`, where `v` is the
/// eigenvector of the eigenvalue of smallest modulus and `d_j` the distance
/// of column `j` to the span of the others.
pub fn sigma_min_bound_violation(m: &SampledMatrix) -> Result<InstanceError, OracleError> {
    let n = m.n;
    if n < 2 {
        return Err(OracleError::InvalidInput("sigma_min bound needs n >= 2"));
    }
    let spec = decompose(m, true)?;
    let k = (0..n).min_by(|&a, &b| math::abs(spec.eigenvalues[a]).total_cmp(&math::abs(spec.eigenvalues[b]))).unwrap_or(0);
    let smin = math::abs(spec.eigenvalues[k]);
    let v = spec.eigenvector(k).expect("vectors requested");
    let dense = as_dense(m);
    let mut worst = InstanceError { abs: 0.0, rel: 0.0 };
    for j in 0..n {
        let rhs = math::abs(v[j]) * column_distance_to_span(&dense, j);
        let excess = (rhs - smin).max(0.0);
        worst.abs = worst.abs.max(excess);
        worst.rel = worst.rel.max(if excess > 0.0 { excess / smin.max(rhs) } else { 0.0 });
    }
    Ok(worst)
}

pub fn sigma_min_bound_instance(n: usize, seed: u64) -> Result<InstanceError, OracleError> {
    sigma_min_bound_violation(&random_symmetric(n, seed))
}

pub fn sigma_min_distance_bound_check<E: TrialExecutor>(n: usize, instances: u64, seed: u64, exec: &E) -> Result<IdentityCheckResult, OracleError> {
    if n < 2 || instances == 0 {
        return Err(OracleError::InvalidInput("need n >= 2 and at least one instance"));
    }
    let results = exec.map_trials(instances, |i| {
        let s = trial_seed(seed, i);
        sigma_min_bound_instance(n, s).map(|r| (s, Some(r)))
    });
    Ok(reduce(results.into_iter().collect::<Result<Vec<_>, _>>()?))
}

/// Violation of `σ_min(M_1⋯M_d) ≥ σ_min(M_1)⋯σ_min(M_d)`.
pub fn product_violation(factors: &[DenseMatrix]) -> Result<InstanceError, OracleError> {
    let first = factors.first().ok_or(OracleError::InvalidInput("need at least one factor"))?;
    let n = first.rows;
    if factors.iter().any(|f| f.rows != n || f.cols != n) {
        return Err(OracleError::InvalidInput("factors must be square of one size"));
    }
    let mut prod = first.clone();
    let mut rhs = sigma_min(first);
    for f in &factors[1..] {
        prod = prod.matmul(f);
        rhs *= sigma_min(f);
    }
    let lhs = sigma_min(&prod);
    let excess = (rhs - lhs).max(0.0);
    Ok(InstanceError { abs: excess, rel: if excess > 0.0 { excess / rhs } else { 0.0 } })
}

pub fn product_instance(d: usize, n: usize, seed: u64) -> Result<InstanceError, OracleError> {
    let factors: Vec<DenseMatrix> = (0..d as u64).map(|k| DenseMatrix::gaussian(n, n, &mut rng_from_seed(substream(seed, k)))).collect();
    product_violation(&factors)
}

pub fn product_inequality_check<E: TrialExecutor>(d: usize, n: usize, instances: u64, seed: u64, exec: &E) -> Result<IdentityCheckResult, OracleError> {
    if d < 2 || n == 0 || instances == 0 {
        return Err(OracleError::InvalidInput("need d >= 2, n >= 1 and at least one instance"));
    }
    let results = exec.map_trials(instances, |i| {
        let s = trial_seed(seed, i);
        product_instance(d, n, s).map(|r| (s, Some(r)))
    });
    Ok(reduce(results.into_iter().collect::<Result<Vec<_>, _>>()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub exceedances: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HansonWrightTable {
    pub hs_norm: f64,
    pub op_norm: f64,
    pub trials: u64,
    pub rows: Vec<TailRow>,
    /// Tail at `t = 4‖M‖_op`.
    pub tail_at_four_op: f64,
    pub monotone: bool,
    pub passed: bool,
}

/// Empirical tail of `|‖MX‖₂ − ‖M‖_HS| > t` for `X` with i.i.d. entries.
pub fn hanson_wright_check<E: TrialExecutor>(
    m: &DenseMatrix,
    entry: &EntryDistribution,
    trials: u64,
    t_grid: &[f64],
    seed: u64,
    exec: &E,
) -> Result<HansonWrightTable, OracleError> {
    entry.validate()?;
    if math::abs(entry.variance - 1.0) > 1e-12 {
        return Err(OracleError::InvalidInput("entries must have unit variance"));
    }
    if trials == 0 || t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(OracleError::InvalidInput("need trials > 0 and t >= 0"));
    }
    let hs = m.frobenius_norm();
    let op = sigma_max(m);
    let deviations = exec.map_trials(trials, |i| {
        let mut rng = rng_from_seed(trial_seed(seed, i));
        let x: Vec<f64> = (0..m.cols).map(|_| entry.sample(&mut rng)).collect();
        math::abs(norm2(&m.matvec(&x)) - hs)
    });
    let tail = |t: f64| deviations.iter().filter(|&&g| g > t).count() as u64;
    let rows: Vec<TailRow> = t_grid
        .iter()
        .map(|&t| {
            let e = tail(t);
            TailRow { t, exceedances: e, frequency: e as f64 / trials as f64 }
        })
        .collect();
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let monotone = sorted.windows(2).all(|w| w[1].frequency <= w[0].frequency);
    let tail_at_four_op = tail(4.0 * op) as f64 / trials as f64;
    Ok(HansonWrightTable { hs_norm: hs, op_norm: op, trials, rows, tail_at_four_op, monotone, passed: monotone && tail_at_four_op < 0.05 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingConfig {
    pub theta: f64,
    /// Symmetric `n × n`, `n ≤ 8`.
    pub m: DenseMatrix,
    pub u: Vec<f64>,
    pub entry: EntryDistribution,
    pub inner_trials: u64,
    pub outer_trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingResult {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub margin_stderr: f64,
    /// Upper bound on the upward bias of `rhs` from the inner modulus.
    pub bias_bound: f64,
    /// `margin − bias_bound ≥ −3·margin_stderr`.
    pub passed: bool,
}

/// `2π·frac(x)`, keeping the phase small before the trig calls.
#[inline]
fn phase(x: f64) -> f64 {
    2.0 * math::PI * (x - libm::round(x))
}

/// Number of coordinates in the first block `X_1`.
pub fn decoupling_split(n: usize) -> usize {
    n.div_ceil(2)
}

/// Nested Monte Carlo estimate of both sides of the decoupling inequality
/// `|E e^{2πiθ⟨MX,X⟩+⟨X,u⟩}|² ≤ E_{X₂,X₂'}[e^{⟨X₂+X₂',u⟩}|E_{X₁} e^{4πiθ⟨M(X₂−X₂'),X₁⟩+2⟨X₁,u⟩}|]`
/// with `X = X₁ + X₂` split over the first `⌈n/2⌉` coordinates and the rest.
///
/// The left side uses the unbiased pair statistic `(|ΣF|² − Σ|F|²)/(N(N−1))`
/// over `outer·inner` draws in `outer` blocks (jackknife error). The right side
/// averages `outer` independent inner estimates; the inner modulus is biased
/// upward by at most `min(√(V/N), V/(2N|Ẑ|))`, which is subtracted before the
/// pass decision.
pub fn decoupling_check<E: TrialExecutor>(cfg: &DecouplingConfig, exec: &E) -> Result<DecouplingResult, OracleError> {
    let n = cfg.m.rows;
    if n == 0 || n > 8 || cfg.m.cols != n || cfg.u.len() != n {
        return Err(OracleError::InvalidInput("need a square M with n <= 8 and u of length n"));
    }
    if (0..n).any(|i| (0..i).any(|j| cfg.m.get(i, j) != cfg.m.get(j, i))) {
        return Err(OracleError::InvalidInput("M must be symmetric"));
    }
    if cfg.inner_trials < 2 || cfg.outer_trials < 2 || !cfg.theta.is_finite() {
        return Err(OracleError::InvalidInput("need at least 2 inner and 2 outer trials"));
    }
    cfg.entry.validate()?;
    let split = decoupling_split(n);
    let m = &cfg.m;
    let u = &cfg.u;
    let inner = cfg.inner_trials;
    let quad = |x: &[f64]| -> f64 {
        let mut q = 0.0;
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                r += m.get(i, j) * x[j];
            }
            q += x[i] * r;
        }
        q
    };

    // Left side: per block (Σ re, Σ im, Σ |F|²).
    let lhs_seed = substream(cfg.seed, 0);
    let blocks = exec.map_trials(cfg.outer_trials, |b| {
        let mut rng = rng_from_seed(trial_seed(lhs_seed, b));
        let mut x = vec![0.0; n];
        let (mut re, mut im, mut sq) = (0.0, 0.0, 0.0);
        for _ in 0..inner {
            for xi in x.iter_mut() {
                *xi = cfg.entry.sample(&mut rng);
            }
            let w = math::exp(x.iter().zip(u).map(|(a, b)| a * b).sum());
            let ph = phase(cfg.theta * quad(&x));
            re += w * math::cos(ph);
            im += w * math::sin(ph);
            sq += w * w;
        }
        (re, im, sq)
    });
    let pair_stat = |re: f64, im: f64, sq: f64, count: f64| (re * re + im * im - sq) / (count * (count - 1.0));
    let (tr, ti, ts) = blocks.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let total = (cfg.outer_trials * inner) as f64;
    let lhs = pair_stat(tr, ti, ts, total);
    let nb = blocks.len() as f64;
    let loo: Vec<f64> = blocks.iter().map(|b| pair_stat(tr - b.0, ti - b.1, ts - b.2, total - inner as f64)).collect();
    let loo_mean = loo.iter().sum::<f64>() / nb;
    let lhs_stderr = math::sqrt((nb - 1.0) / nb * loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum::<f64>());

    // Right side: per outer draw (term, bias bound).
    let rhs_seed = substream(cfg.seed, 1);
    let terms = exec.map_trials(cfg.outer_trials, |b| {
        let mut rng = rng_from_seed(trial_seed(rhs_seed, b));
        let x2: Vec<f64> = (split..n).map(|_| cfg.entry.sample(&mut rng)).collect();
        let x2p: Vec<f64> = (split..n).map(|_| cfg.entry.sample(&mut rng)).collect();
        let outer_w = math::exp((split..n).map(|j| (x2[j - split] + x2p[j - split]) * u[j]).sum());
        // w_i = (M(X₂ − X₂'))_i for i in the first block
        let w: Vec<f64> = (0..split).map(|i| (split..n).map(|j| m.get(i, j) * (x2[j - split] - x2p[j - split])).sum()).collect();
        let mut vals = Vec::with_capacity(inner as usize);
        let (mut re, mut im) = (0.0, 0.0);
        let mut x1 = vec![0.0; split];
        for _ in 0..inner {
            for xi in x1.iter_mut() {
                *xi = cfg.entry.sample(&mut rng);
            }
            let lin: f64 = x1.iter().zip(&w).map(|(a, b)| a * b).sum();
            let amp = math::exp(2.0 * x1.iter().zip(u).map(|(a, b)| a * b).sum::<f64>());
            let ph = phase(2.0 * cfg.theta * lin);
            let g = (amp * math::cos(ph), amp * math::sin(ph));
            re += g.0;
            im += g.1;
            vals.push(g);
        }
        let k = inner as f64;
        let (zr, zi) = (re / k, im / k);
        let var = vals.iter().map(|(a, b)| (a - zr) * (a - zr) + (b - zi) * (b - zi)).sum::<f64>() / (k - 1.0);
        let modz = math::hypot(zr, zi);
        let mut bias = math::sqrt(var / k);
        if modz > 0.0 {
            bias = bias.min(var / (2.0 * k * modz));
        }
        (outer_w * modz, outer_w * bias)
    });
    let no = terms.len() as f64;
    let rhs = terms.iter().map(|t| t.0).sum::<f64>() / no;
    let rhs_var = terms.iter().map(|t| (t.0 - rhs) * (t.0 - rhs)).sum::<f64>() / (no - 1.0);
    let rhs_stderr = math::sqrt(rhs_var / no);
    let bias_bound = terms.iter().map(|t| t.1).sum::<f64>() / no;
    let margin = rhs - lhs;
    let margin_stderr = math::hypot(lhs_stderr, rhs_stderr);
    let passed = margin - bias_bound >= -3.0 * margin_stderr;
    Ok(DecouplingResult { lhs, lhs_stderr, rhs, rhs_stderr, margin, margin_stderr, bias_bound, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionVolumeRow {
    pub d: usize,
    pub s: f64,
    /// Closed form for `d = 2`, numerically integrated recursion otherwise.
    pub reference: f64,
    pub monte_carlo: f64,
    pub mc_stderr: f64,
    pub samples: u64,
    /// `|monte_carlo − reference| ≤ 3·mc_stderr`.
    pub agrees: bool,
}

/// Volume of `{θ ∈ ℝ²: |θ₁θ₂| ≤ s², |θ_i| ≥ 1}`: `4(s² ln s² − s² + 1)`.
pub fn region_volume_d2(s: f64) -> f64 {
    if s <= 1.0 {
        return 0.0;
    }
    let s2 = s * s;
    4.0 * (s2 * math::ln(s2) - s2 + 1.0)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    let nf = order as f64;
    for i in 0..order {
        let mut x = math::cos(math::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else if order == 1 { x } else { p1 };
            let pm = if order == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if math::abs(dx) < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

const QUADRATURE_ORDER: usize = 48;

/// Positive-orthant volume `G_d(T)` of `{x_i ≥ 1, Πx_i ≤ T}` through
/// `G_d(T) = ∫_1^T G_{d−1}(T/y) dy`, integrated in `u = ln y`.
fn orthant_volume(d: usize, big_t: f64, nodes: &[(f64, f64)]) -> f64 {
    if big_t <= 1.0 {
        return 0.0;
    }
    if d == 1 {
        return big_t - 1.0;
    }
    let l = math::ln(big_t);
    let half = 0.5 * l;
    nodes
        .iter()
        .map(|&(x, w)| {
            let u = half * (x + 1.0);
            w * half * orthant_volume(d - 1, big_t * math::exp(-u), nodes) * math::exp(u)
        })
        .sum()
}

/// `F_d(s^d)`: volume of `{θ ∈ ℝ^d: Π|θ_i| ≤ s^d, |θ_i| ≥ 1}` from the
/// recursion `F_d(T) = 2∫_1^T F_{d−1}(T/y) dy`, `F_1(T) = 2(T − 1)`.
pub fn region_volume_recursive(d: usize, s: f64) -> f64 {
    let nodes = gauss_legendre(QUADRATURE_ORDER);
    (1u64 << d) as f64 * orthant_volume(d, math::powf(s, d as f64), &nodes)
}

/// Hit-or-miss estimate on the box `[1, s^d]^d` of one orthant, scaled by `2^d`.
/// Returns `(estimate, standard error)`.
pub fn region_volume_monte_carlo<E: TrialExecutor>(d: usize, s: f64, samples: u64, seed: u64, exec: &E) -> (f64, f64) {
    const CHUNK: u64 = 1 << 16;
    let big_t = math::powf(s, d as f64);
    if big_t <= 1.0 || samples == 0 {
        return (0.0, 0.0);
    }
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = exec
        .map_trials(chunks, |c| {
            let mut rng = rng_from_seed(trial_seed(seed, c));
            let count = CHUNK.min(samples - c * CHUNK);
            let mut h = 0u64;
            for _ in 0..count {
                let mut p = 1.0;
                for _ in 0..d {
                    let r: f64 = rng.random();
                    p *= 1.0 + (big_t - 1.0) * r;
                }
                if p <= big_t {
                    h += 1;
                }
            }
            h
        })
        .iter()
        .sum();
    let box_volume = (1u64 << d) as f64 * math::powf(big_t - 1.0, d as f64);
    let p = hits as f64 / samples as f64;
    (box_volume * p, box_volume * math::sqrt(p * (1.0 - p) / samples as f64))
}

pub fn region_volume_check<E: TrialExecutor>(d: usize, s_grid: &[f64], samples: u64, seed: u64, exec: &E) -> Result<Vec<RegionVolumeRow>, OracleError> {
    if !(2..=4).contains(&d) {
        return Err(OracleError::InvalidInput("d must be 2, 3 or 4"));
    }
    if s_grid.iter().any(|s| !(*s > 1.0) || !s.is_finite()) || samples == 0 {
        return Err(OracleError::InvalidInput("need s > 1 and samples > 0"));
    }
    Ok(s_grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let reference = if d == 2 { region_volume_d2(s) } else { region_volume_recursive(d, s) };
            let (mc, se) = region_volume_monte_carlo(d, s, samples, substream(seed, i as u64), exec);
            RegionVolumeRow { d, s, reference, monte_carlo: mc, mc_stderr: se, samples, agrees: math::abs(mc - reference) <= 3.0 * se }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormRow {
    pub t: f64,
    /// `(3 + t)√n`.
    pub threshold: f64,
    pub exceedances: u64,
    pub trials: u64,
    pub frequency: f64,
}

/// Empirical `P(‖A‖_op ≥ (3 + t)√n)` for each `t` (`t ≥ −3`).
pub fn operator_norm_tail<E: TrialExecutor>(spec: &EnsembleSpec, trials: u64, t_grid: &[f64], exec: &E) -> Result<Vec<OperatorNormRow>, OracleError> {
    spec.validate()?;
    if trials < 100 {
        return Err(OracleError::InvalidInput("operator norm tail needs at least 100 trials"));
    }
    if t_grid.iter().any(|t| !(*t >= -3.0) || !t.is_finite()) {
        return Err(OracleError::InvalidInput("t must be finite and at least -3"));
    }
    let norms = exec.map_trials(trials, |i| -> Result<f64, OracleError> {
        let m = sample_matrix(spec, i)?;
        Ok(operator_norm(&decompose(&m, false)?))
    });
    let norms = norms.into_iter().collect::<Result<Vec<_>, _>>()?;
    let root = math::sqrt(spec.n as f64);
    Ok(t_grid
        .iter()
        .map(|&t| {
            let threshold = (3.0 + t) * root;
            let e = norms.iter().filter(|&&x| x >= threshold).count() as u64;
            OperatorNormRow { t, threshold, exceedances: e, trials, frequency: e as f64 / trials as f64 }
        })
        .collect())
}

/// Singular values of a dense matrix, re-exported for callers composing
/// their own checks.
pub fn dense_singular_values(m: &DenseMatrix) -> Vec<f64> {
    singular_values(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;

    #[test]
    fn distance_identity_diagonal() {
        let a = SampledMatrix::diagonal(&[2.0, 3.0]);
        let (p, f) = distance_identity_sides(&a).unwrap().unwrap();
        assert!((p - 2.0).abs() < 1e-15 && (f - 2.0).abs() < 1e-15);
    }

    #[test]
    fn distance_identity_random() {
        let r = distance_identity_check(5, 100, 11, &Serial).unwrap();
        assert!(r.max_rel_error <= 1e-10, "{r:?}");
        let again = distance_identity_instance(5, r.worst_seed).unwrap().unwrap();
        assert_eq!(again.rel, r.max_rel_error);
    }

    #[test]
    fn sigma_min_bound_diagonal_equality() {
        let e = sigma_min_bound_violation(&SampledMatrix::diagonal(&[1.0, 5.0])).unwrap();
        assert_eq!(e.abs, 0.0);
        let e = sigma_min_bound_violation(&SampledMatrix::diagonal(&[1.0; 4])).unwrap();
        assert_eq!(e.abs, 0.0);
    }

    #[test]
    fn product_identity_and_singular() {
        let id = DenseMatrix::identity(3);
        assert_eq!(product_violation(&[id.clone(), id.clone()]).unwrap().abs, 0.0);
        let mut sing = DenseMatrix::identity(3);
        sing.set(2, 2, 0.0);
        assert_eq!(product_violation(&[sing, id]).unwrap().abs, 0.0);
    }

    #[test]
    fn hanson_wright_zero_matrix() {
        let m = DenseMatrix::zeros(5, 5);
        let t = hanson_wright_check(&m, &EntryDistribution::gaussian(1.0), 200, &[0.5, 1.0], 3, &Serial).unwrap();
        assert!(t.rows.iter().all(|r| r.exceedances == 0));
        assert_eq!(t.tail_at_four_op, 0.0);
    }

    #[test]
    fn decoupling_trivial_cases() {
        let m = DenseMatrix::from_rows(2, 2, vec![1.0, 0.5, 0.5, -1.0]);
        let cfg = DecouplingConfig { theta: 0.0, m, u: vec![0.0; 2], entry: EntryDistribution::gaussian(1.0), inner_trials: 50, outer_trials: 20, seed: 1 };
        let r = decoupling_check(&cfg, &Serial).unwrap();
        assert_eq!((r.lhs, r.rhs, r.margin), (1.0, 1.0, 0.0));
        let cfg = DecouplingConfig { theta: 0.37, m: DenseMatrix::zeros(3, 3), u: vec![0.0; 3], ..cfg };
        let r = decoupling_check(&cfg, &Serial).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.0, 1.0));
    }

    #[test]
    fn region_volume_values() {
        assert!((region_volume_d2(2.0) - 10.1807).abs() < 1e-4);
        assert!(region_volume_d2(1.0 + 1e-9) < 1e-12);
        assert!((region_volume_recursive(2, 2.0) - region_volume_d2(2.0)).abs() < 1e-10);
        let (mc, se) = region_volume_monte_carlo(2, 2.0, 200_000, 5, &Serial);
        assert!((mc - region_volume_d2(2.0)).abs() <= 3.0 * se);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre(8);
        let w: f64 = nodes.iter().map(|p| p.1).sum();
        assert!((w - 2.0).abs() < 1e-13);
        let x4: f64 = nodes.iter().map(|p| p.1 * p.0.powi(4)).sum();
        assert!((x4 - 0.4).abs() < 1e-13);
    }

    #[test]
    fn operator_norm_extremes() {
        let rows = operator_norm_tail(&EnsembleSpec::goe(20, 2), 100, &[-3.0, 100.0], &Serial).unwrap();
        assert_eq!(rows[0].frequency, 1.0);
        assert_eq!(rows[1].frequency, 0.0);
    }
}
