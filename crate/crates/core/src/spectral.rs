//! Spectra of sampled matrices and the quantities derived from them.
//!
//! `A - λI` has the eigenvectors of `A` and eigenvalues `e_k - λ`, so one
//! decomposition answers every question about every location: singular
//! values of `A - λI` are the distances `|e_k - λ|`, and the singular values
//! of its inverse are their reciprocals.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::symmetric_eigen;
use crate::ensemble::SampledMatrix;
use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge (trial seed {seed:#018x})")]
    SolverFailure { seed: u64 },
    #[error("location {lambda} coincides with an eigenvalue")]
    SingularLocation { lambda: f64 },
    #[error("index k = {k} outside 1..={n}")]
    IndexOutOfRange { k: usize, n: usize },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub n: usize,
    /// Ascending, unnormalized scale.
    pub eigenvalues: Vec<f64>,
    /// Column-major orthonormal eigenvectors; vector `k` pairs with
    /// `eigenvalues[k]`.
    pub eigenvectors: Option<Vec<f64>>,
    /// With eigenvectors: `max_k ‖A v_k − e_k v_k‖₂`. Without: the trace
    /// discrepancy `|tr A − Σ e_k|`.
    pub residual_norm: f64,
}

impl Spectrum {
    /// Spectrum with prescribed eigenvalues and no matrix behind it. Values
    /// are sorted.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self { n: eigenvalues.len(), eigenvalues, eigenvectors: None, residual_norm: 0.0 }
    }

    pub fn eigenvector(&self, k: usize) -> Option<&[f64]> {
        self.eigenvectors.as_ref().map(|v| &v[k * self.n..(k + 1) * self.n])
    }

    /// Eigenvalues divided by `√n`.
    pub fn normalized(&self) -> Vec<f64> {
        let s = math::sqrt(self.n as f64);
        self.eigenvalues.iter().map(|e| e / s).collect()
    }
}

/// Eigendecomposition of a sampled matrix.
pub fn decompose(matrix: &SampledMatrix, want_vectors: bool) -> Result<Spectrum, SpectralError> {
    let n = matrix.n;
    let out = symmetric_eigen(&matrix.data, n, want_vectors)
        .map_err(|_| SpectralError::SolverFailure { seed: matrix.trial_seed })?;
    let residual_norm = match &out.vectors {
        Some(vecs) => {
            let mut worst: f64 = 0.0;
            for k in 0..n {
                let v = &vecs[k * n..(k + 1) * n];
                let mut r2 = 0.0;
                for i in 0..n {
                    let row = matrix.row(i);
                    let av: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
                    let r = av - out.values[k] * v[i];
                    r2 += r * r;
                }
                worst = worst.max(math::sqrt(r2));
            }
            worst
        }
        None => math::abs(matrix.trace() - out.values.iter().sum::<f64>()),
    };
    Ok(Spectrum { n, eigenvalues: out.values, eigenvectors: out.vectors, residual_norm })
}

/// Index of the first eigenvalue `>= lambda`.
fn insertion_point(values: &[f64], lambda: f64) -> usize {
    values.partition_point(|&e| e < lambda)
}

/// `σ_min(A − λI)`: distance from `λ` to the spectrum.
pub fn sigma_min_at(spectrum: &Spectrum, lambda: f64) -> f64 {
    let ev = &spectrum.eigenvalues;
    if ev.is_empty() {
        return f64::INFINITY;
    }
    let p = insertion_point(ev, lambda);
    let mut best = f64::INFINITY;
    if p < ev.len() {
        best = best.min(math::abs(ev[p] - lambda));
    }
    if p > 0 {
        best = best.min(math::abs(ev[p - 1] - lambda));
    }
    best
}

/// Distances `|e − λ|` in ascending order, merged outward from `λ`. Ties are
/// resolved in favour of the smaller eigenvalue index.
pub fn sorted_distances(spectrum: &Spectrum, lambda: f64) -> Vec<f64> {
    let ev = &spectrum.eigenvalues;
    let n = ev.len();
    let p = insertion_point(ev, lambda);
    let (mut lo, mut hi) = (p, p); // next candidates: lo-1 on the left, hi on the right
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let left = if lo > 0 { Some(math::abs(ev[lo - 1] - lambda)) } else { None };
        let right = if hi < n { Some(math::abs(ev[hi] - lambda)) } else { None };
        match (left, right) {
            (Some(l), Some(r)) if l <= r => {
                out.push(l);
                lo -= 1;
            }
            (Some(l), None) => {
                out.push(l);
                lo -= 1;
            }
            (_, Some(r)) => {
                out.push(r);
                hi += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn check_location(spectrum: &Spectrum, lambda: f64) -> Result<(), SpectralError> {
    if sigma_min_at(spectrum, lambda) == 0.0 {
        return Err(SpectralError::SingularLocation { lambda });
    }
    Ok(())
}

// Ranks stay well defined at an eigenvalue (distance 0 ranks first), so the
// index map only rejects non-finite locations.
fn check_finite(lambda: f64) -> Result<(), SpectralError> {
    if !lambda.is_finite() {
        return Err(SpectralError::InvalidInput("location must be finite"));
    }
    Ok(())
}

/// `μ_k(λ)`: the `k`-th largest singular value of `(A − λI)^{-1}`, `k` 1-based.
pub fn mu_k(spectrum: &Spectrum, lambda: f64, k: usize) -> Result<f64, SpectralError> {
    let n = spectrum.n;
    if k == 0 || k > n {
        return Err(SpectralError::IndexOutOfRange { k, n });
    }
    check_location(spectrum, lambda)?;
    // Only the k nearest are needed, but the merge is O(k) anyway.
    let ev = &spectrum.eigenvalues;
    let p = insertion_point(ev, lambda);
    let (mut lo, mut hi) = (p, p);
    let mut last = 0.0;
    for _ in 0..k {
        let left = (lo > 0).then(|| math::abs(ev[lo - 1] - lambda));
        let right = (hi < n).then(|| math::abs(ev[hi] - lambda));
        last = match (left, right) {
            (Some(l), Some(r)) if l <= r => {
                lo -= 1;
                l
            }
            (Some(l), None) => {
                lo -= 1;
                l
            }
            (_, Some(r)) => {
                hi += 1;
                r
            }
            (None, None) => unreachable!(),
        };
    }
    Ok(1.0 / last)
}

/// All of `μ_1(λ) ≥ … ≥ μ_n(λ)`.
pub fn mu_all(spectrum: &Spectrum, lambda: f64) -> Result<Vec<f64>, SpectralError> {
    check_location(spectrum, lambda)?;
    Ok(sorted_distances(spectrum, lambda).into_iter().map(|d| 1.0 / d).collect())
}

/// `‖(A − λI)^{-1}‖_*`, the square root of `Σ_k μ_k² log₂²(1 + k)`.
///
/// The base-2 logarithm makes every weight at least 1, so the norm dominates
/// the Hilbert–Schmidt norm of the resolvent.
pub fn star_norm(spectrum: &Spectrum, lambda: f64) -> Result<f64, SpectralError> {
    let mus = mu_all(spectrum, lambda)?;
    let sum: f64 = mus
        .iter()
        .enumerate()
        .map(|(i, mu)| {
            let w = math::log2(2.0 + i as f64);
            mu * mu * w * w
        })
        .sum();
    Ok(math::sqrt(sum))
}

/// Number of eigenvalues of `A/√n` in the closed window `[E − η/2, E + η/2]`.
pub fn counting(spectrum: &Spectrum, energy: f64, eta: f64) -> Result<usize, SpectralError> {
    if !(eta > 0.0) {
        return Err(SpectralError::InvalidInput("eta must be positive"));
    }
    let s = math::sqrt(spectrum.n as f64);
    let (lo, hi) = (energy - eta / 2.0, energy + eta / 2.0);
    let normalized = spectrum.eigenvalues.iter().map(|e| e / s);
    Ok(normalized.filter(|x| *x >= lo && *x <= hi).count())
}

/// Rank (1 = largest `μ`) of every eigenvalue index at location `lambda`.
/// Equidistant eigenvalues: the smaller index ranks first.
fn ranks_at(spectrum: &Spectrum, lambda: f64) -> Vec<usize> {
    let n = spectrum.n;
    let mut order: Vec<usize> = (0..n).collect();
    let dist = |i: usize| math::abs(spectrum.eigenvalues[i] - lambda);
    order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// The map `k ↦ c_j(i, k)`: the rank at `lambda_j` of the eigenvalue whose
/// singular direction has rank `k` at `lambda_i`.
pub fn c_index_map(spectrum: &Spectrum, lambda_i: f64, lambda_j: f64, k: usize) -> Result<usize, SpectralError> {
    let n = spectrum.n;
    if k == 0 || k > n {
        return Err(SpectralError::IndexOutOfRange { k, n });
    }
    check_finite(lambda_i)?;
    check_finite(lambda_j)?;
    let ri = ranks_at(spectrum, lambda_i);
    let idx = ri.iter().position(|&r| r == k).expect("ranks form a permutation");
    Ok(ranks_at(spectrum, lambda_j)[idx])
}

/// The whole permutation `[c_j(i, 1), …, c_j(i, n)]`.
pub fn c_index_permutation(spectrum: &Spectrum, lambda_i: f64, lambda_j: f64) -> Result<Vec<usize>, SpectralError> {
    check_finite(lambda_i)?;
    check_finite(lambda_j)?;
    let ri = ranks_at(spectrum, lambda_i);
    let rj = ranks_at(spectrum, lambda_j);
    let mut out = vec![0; spectrum.n];
    for idx in 0..spectrum.n {
        out[ri[idx] - 1] = rj[idx];
    }
    Ok(out)
}

/// Fraction of coordinates with `|v_j| ≥ threshold_coeff / √n`.
pub fn delocalization_fraction(v: &[f64], threshold_coeff: f64) -> Result<f64, SpectralError> {
    let n = v.len();
    if n == 0 {
        return Err(SpectralError::InvalidInput("empty vector"));
    }
    let norm = math::sqrt(v.iter().map(|x| x * x).sum());
    if norm == 0.0 {
        return Err(SpectralError::InvalidInput("zero vector"));
    }
    if math::abs(norm - 1.0) > 1e-8 {
        return Err(SpectralError::InvalidInput("vector must have unit norm"));
    }
    if !(threshold_coeff > 0.0) {
        return Err(SpectralError::InvalidInput("threshold coefficient must be positive"));
    }
    let t = threshold_coeff / math::sqrt(n as f64);
    Ok(v.iter().filter(|x| math::abs(**x) >= t).count() as f64 / n as f64)
}

/// `‖A‖_op = max(|e_min|, |e_max|)`.
pub fn operator_norm(spectrum: &Spectrum) -> f64 {
    match (spectrum.eigenvalues.first(), spectrum.eigenvalues.last()) {
        (Some(a), Some(b)) => math::abs(*a).max(math::abs(*b)),
        _ => 0.0,
    }
}

/// Hypothesis violations a set of locations can have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LocationIssue {
    BulkViolation,
    SeparationViolation,
    InvalidParameter,
}

/// Locations `λ_1..λ_d` in the bulk `[−(2−κ)√n, (2−κ)√n]` with pairwise
/// separation at least `Δ·n^{σ−1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSet {
    pub lambdas: Vec<f64>,
    pub kappa: f64,
    pub delta_sep: f64,
    pub sep_exponent: f64,
}

/// Minimum pairwise gap `Δ·n^{σ−1/2}`.
pub fn required_separation(n: usize, delta_sep: f64, sep_exponent: f64) -> f64 {
    delta_sep * math::powf(n as f64, sep_exponent - 0.5)
}

impl LocationSet {
    pub fn new(lambdas: Vec<f64>, kappa: f64, delta_sep: f64, sep_exponent: f64, n: usize) -> Result<Self, LocationIssue> {
        let set = Self { lambdas, kappa, delta_sep, sep_exponent };
        match set.issues(n).first() {
            Some(issue) => Err(*issue),
            None => Ok(set),
        }
    }

    /// Every violated hypothesis for matrices of order `n`.
    pub fn issues(&self, n: usize) -> Vec<LocationIssue> {
        let mut out = Vec::new();
        let params_ok = self.kappa > 0.0
            && self.kappa < 2.0
            && self.delta_sep > 0.0
            && self.sep_exponent > 0.0
            && self.sep_exponent <= 1.0
            && !self.lambdas.is_empty()
            && n > 0;
        if !params_ok {
            out.push(LocationIssue::InvalidParameter);
            return out;
        }
        // Relative slack so boundary configurations built by arithmetic
        // (e.g. λ = ±0.7√n with Δ = 1.4) are not rejected for rounding.
        let slack = 1.0 + 1e-12;
        let edge = (2.0 - self.kappa) * math::sqrt(n as f64) * slack;
        if self.lambdas.iter().any(|l| !(math::abs(*l) <= edge)) {
            out.push(LocationIssue::BulkViolation);
        }
        let sep = required_separation(n, self.delta_sep, self.sep_exponent) / slack;
        let d = self.lambdas.len();
        if (0..d).any(|i| (i + 1..d).any(|j| math::abs(self.lambdas[i] - self.lambdas[j]) < sep)) {
            out.push(LocationIssue::SeparationViolation);
        }
        out
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }
}
