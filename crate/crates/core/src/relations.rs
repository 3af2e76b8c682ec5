//! Linear relations among distant bulk eigenvalues: the minimum of
//! `|Σ a_i x_i − c|` over ordered tuples of distinct eigenvalues.
//!
//! The scan sorts the admissible eigenvalues once, enumerates the first
//! `d − 1` coordinates depth-first with a branch-and-bound cut on the range of
//! reachable sums, and finds the last coordinate by binary search for its
//! target followed by a descent over the (unimodal) values on each side.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{sample_matrix, EnsembleError, EnsembleSpec};
use crate::exec::TrialExecutor;
use crate::math;
use crate::spectral::{decompose, required_separation, SpectralError, Spectrum};
use crate::stats::{fit_loglog, median, ScalingFit, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelationError {
    #[error("no admissible tuple (tuple_count = 0)")]
    EmptyDomain,
    #[error("invalid relation: {0}")]
    InvalidSpec(&'static str),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Pairwise separation requirement `|x_i − x_j| ≥ Δ·n^{σ−1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub delta_sep: f64,
    pub sep_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub coefficients: Vec<f64>,
    pub offset: f64,
    /// Bulk window `[−(2−κ)√n, (2−κ)√n]`; `None` admits every eigenvalue.
    pub kappa: Option<f64>,
    /// `None` only requires distinct indices.
    pub separation: Option<Separation>,
}

impl RelationSpec {
    pub fn unfiltered(coefficients: Vec<f64>, offset: f64) -> Self {
        Self { coefficients, offset, kappa: None, separation: None }
    }

    pub fn filtered(coefficients: Vec<f64>, offset: f64, kappa: f64, delta_sep: f64, sep_exponent: f64) -> Self {
        Self { coefficients, offset, kappa: Some(kappa), separation: Some(Separation { delta_sep, sep_exponent }) }
    }

    pub fn d(&self) -> usize {
        self.coefficients.len()
    }

    pub fn validate(&self) -> Result<(), RelationError> {
        if self.coefficients.is_empty() {
            return Err(RelationError::InvalidSpec("need at least one coefficient"));
        }
        if self.coefficients.iter().any(|a| *a == 0.0 || !a.is_finite()) || !self.offset.is_finite() {
            return Err(RelationError::InvalidSpec("coefficients must be nonzero and finite"));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k < 2.0) {
                return Err(RelationError::InvalidSpec("kappa must lie in (0, 2)"));
            }
        }
        if let Some(s) = self.separation {
            if !(s.delta_sep > 0.0) || !(s.sep_exponent > 0.0 && s.sep_exponent <= 1.0) {
                return Err(RelationError::InvalidSpec("separation needs delta > 0 and exponent in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Eigenvalues inside the bulk window, ascending.
    pub fn admissible_values(&self, spectrum: &Spectrum) -> Vec<f64> {
        match self.kappa {
            None => spectrum.eigenvalues.clone(),
            Some(k) => {
                let edge = (2.0 - k) * math::sqrt(spectrum.n as f64);
                spectrum.eigenvalues.iter().copied().filter(|x| math::abs(*x) <= edge).collect()
            }
        }
    }

    pub fn min_gap(&self, n: usize) -> f64 {
        self.separation.map_or(0.0, |s| required_separation(n, s.delta_sep, s.sep_exponent))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScanResult {
    pub min_value: f64,
    /// `x_1..x_d` in coefficient order.
    pub argmin_tuple: Vec<f64>,
    /// Number of admissible ordered tuples.
    pub tuple_count: u128,
}

/// `|a_1 x_1 + … + a_d x_d − c|`, summed left to right.
#[inline]
pub fn relation_value(coefficients: &[f64], xs: &[f64], offset: f64) -> f64 {
    let mut s = 0.0;
    for (a, x) in coefficients.iter().zip(xs) {
        s += a * x;
    }
    math::abs(s - offset)
}

/// Number of ordered `d`-tuples of distinct indices whose values are pairwise
/// at least `gap` apart, for sorted `values`.
pub fn count_admissible_tuples(values: &[f64], d: usize, gap: f64) -> u128 {
    let m = values.len();
    if d == 0 || d > m {
        return 0;
    }
    // chains[j] = number of increasing chains of the current length ending at j
    let mut chains = vec![1u128; m];
    for _ in 1..d {
        let mut prefix = vec![0u128; m + 1];
        for j in 0..m {
            prefix[j + 1] = prefix[j] + chains[j];
        }
        let mut next = vec![0u128; m];
        let mut reach = 0usize; // indices < reach satisfy values[j] - values[i] >= gap
        for j in 0..m {
            while reach < j && values[j] - values[reach] >= gap {
                reach += 1;
            }
            // For gap == 0 the condition holds for every earlier index.
            let limit = if gap <= 0.0 { j } else { reach };
            next[j] = prefix[limit];
        }
        chains = next;
    }
    let unordered: u128 = chains.iter().sum();
    (1..=d as u128).product::<u128>() * unordered
}

struct Scan<'a> {
    values: &'a [f64],
    coeffs: &'a [f64],
    offset: f64,
    gap: f64,
    chosen_idx: Vec<usize>,
    chosen_val: Vec<f64>,
    best: f64,
    best_tuple: Vec<f64>,
    /// Per remaining suffix: (min, max) of Σ a_i x_i over unconstrained x.
    suffix_range: Vec<(f64, f64)>,
    slack: f64,
}

impl Scan<'_> {
    fn admissible(&self, j: usize) -> bool {
        let x = self.values[j];
        self.chosen_idx.iter().zip(&self.chosen_val).all(|(&i, &v)| i != j && math::abs(x - v) >= self.gap)
    }

    fn partial_sum(&self) -> f64 {
        let mut s = 0.0;
        for (a, x) in self.coeffs.iter().zip(&self.chosen_val) {
            s += a * x;
        }
        s
    }

    fn consider(&mut self, j: usize) -> f64 {
        self.chosen_val.push(self.values[j]);
        let v = relation_value(self.coeffs, &self.chosen_val, self.offset);
        if v < self.best {
            self.best = v;
            self.best_tuple = self.chosen_val.clone();
        }
        self.chosen_val.pop();
        v
    }

    fn last_level(&mut self) {
        let a = *self.coeffs.last().unwrap();
        let s = self.partial_sum();
        let target = (self.offset - s) / a;
        let m = self.values.len();
        let p = self.values.partition_point(|&x| x < target);
        // Nearest admissible on each side of the target, then keep walking
        // while the exact value strictly decreases.
        let mut left = p;
        while left > 0 {
            left -= 1;
            if self.admissible(left) {
                let mut cur = self.consider(left);
                let mut k = left;
                while k > 0 {
                    k -= 1;
                    if !self.admissible(k) {
                        continue;
                    }
                    let v = self.consider(k);
                    if v > cur {
                        break;
                    }
                    cur = v;
                }
                break;
            }
        }
        let mut right = p;
        while right < m {
            if self.admissible(right) {
                let mut cur = self.consider(right);
                let mut k = right + 1;
                while k < m {
                    if self.admissible(k) {
                        let v = self.consider(k);
                        if v > cur {
                            break;
                        }
                        cur = v;
                    }
                    k += 1;
                }
                break;
            }
            right += 1;
        }
    }

    fn descend(&mut self) {
        let level = self.chosen_idx.len();
        if level + 1 == self.coeffs.len() {
            self.last_level();
            return;
        }
        for j in 0..self.values.len() {
            if !self.admissible(j) {
                continue;
            }
            self.chosen_idx.push(j);
            self.chosen_val.push(self.values[j]);
            // Distance from the offset to the reachable interval of sums.
            let s = self.partial_sum();
            let (lo, hi) = self.suffix_range[level + 1];
            let need = self.offset - s;
            let bound = if need < lo { lo - need } else if need > hi { need - hi } else { 0.0 };
            if bound <= self.best + self.slack {
                self.descend();
            }
            self.chosen_idx.pop();
            self.chosen_val.pop();
        }
    }
}

/// Exact minimum of `|Σ a_i x_i − c|` over admissible ordered tuples.
pub fn min_linear_relation(spectrum: &Spectrum, spec: &RelationSpec) -> Result<RelationScanResult, RelationError> {
    spec.validate()?;
    let values = spec.admissible_values(spectrum);
    let gap = spec.min_gap(spectrum.n);
    let d = spec.d();
    let tuple_count = count_admissible_tuples(&values, d, gap);
    if tuple_count == 0 {
        return Err(RelationError::EmptyDomain);
    }
    let (vmin, vmax) = (values[0], values[values.len() - 1]);
    let mut suffix_range = vec![(0.0, 0.0); d + 1];
    for i in (0..d).rev() {
        let a = spec.coefficients[i];
        let (p, q) = (a * vmin, a * vmax);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        suffix_range[i] = (suffix_range[i + 1].0 + lo, suffix_range[i + 1].1 + hi);
    }
    let scale = spec.coefficients.iter().map(|a| math::abs(*a)).sum::<f64>() * vmin.abs().max(vmax.abs()) + math::abs(spec.offset);
    let mut scan = Scan {
        values: &values,
        coeffs: &spec.coefficients,
        offset: spec.offset,
        gap,
        chosen_idx: Vec::with_capacity(d),
        chosen_val: Vec::with_capacity(d),
        best: f64::INFINITY,
        best_tuple: Vec::new(),
        suffix_range,
        slack: 1e-9 * (1.0 + scale),
    };
    scan.descend();
    if !scan.best.is_finite() {
        return Err(RelationError::EmptyDomain);
    }
    Ok(RelationScanResult { min_value: scan.best, argmin_tuple: scan.best_tuple, tuple_count })
}

/// Smallest `|x_i + x_j|` over distant bulk pairs; zero would mean two equal
/// singular values of `A`.
pub fn distinct_singular_gap(spectrum: &Spectrum, kappa: Option<f64>, separation: Option<Separation>) -> Result<RelationScanResult, RelationError> {
    let spec = RelationSpec { coefficients: vec![1.0, 1.0], offset: 0.0, kappa, separation };
    min_linear_relation(spectrum, &spec)
}

/// Brute-force minimum of an arbitrary relation `f(x_1..x_d) ≥ 0` over
/// admissible tuples. Extension point for nonlinear relations; `O(m^d)`.
pub fn min_relation_by<F: Fn(&[f64]) -> f64>(spectrum: &Spectrum, d: usize, kappa: Option<f64>, separation: Option<Separation>, f: F) -> Result<RelationScanResult, RelationError> {
    let filter = RelationSpec { coefficients: vec![1.0; d.max(1)], offset: 0.0, kappa, separation };
    filter.validate()?;
    let values = filter.admissible_values(spectrum);
    let gap = filter.min_gap(spectrum.n);
    let m = values.len();
    let mut idx = vec![0usize; d];
    let mut best = (f64::INFINITY, Vec::new());
    let mut count = 0u128;
    let mut tuple = vec![0.0; d];
    if d == 0 || m == 0 {
        return Err(RelationError::EmptyDomain);
    }
    loop {
        let ok = (0..d).all(|i| (i + 1..d).all(|j| idx[i] != idx[j] && math::abs(values[idx[i]] - values[idx[j]]) >= gap));
        if ok {
            count += 1;
            for i in 0..d {
                tuple[i] = values[idx[i]];
            }
            let v = f(&tuple);
            if v < best.0 {
                best = (v, tuple.clone());
            }
        }
        let mut pos = d;
        loop {
            if pos == 0 {
                if count == 0 {
                    return Err(RelationError::EmptyDomain);
                }
                return Ok(RelationScanResult { min_value: best.0, argmin_tuple: best.1, tuple_count: count });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < m {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSample {
    pub n: usize,
    pub sample: u64,
    /// `None` when the sample had no admissible tuple.
    pub result: Option<RelationScanResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScalingPoint {
    pub n: usize,
    pub median_min: f64,
    pub samples_used: usize,
    pub samples_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScaling {
    pub points: Vec<RelationScalingPoint>,
    pub fit: ScalingFit,
    /// `−(2d − 1)/2`.
    pub predicted_slope: f64,
}

/// Median-vs-`n` scaling of the scan statistic over spectra produced by
/// `source(n, sample)`.
pub fn scaling_vs_n_with<E, S>(
    spec: &RelationSpec,
    n_grid: &[usize],
    samples_per_n: u64,
    exec: &E,
    source: S,
) -> Result<(RelationScaling, Vec<RelationSample>), RelationError>
where
    E: TrialExecutor,
    S: Fn(usize, u64) -> Result<Spectrum, RelationError> + Sync + Send,
{
    spec.validate()?;
    if n_grid.len() < 3 {
        return Err(RelationError::InvalidSpec("n grid needs at least 3 values"));
    }
    if samples_per_n < 50 {
        return Err(RelationError::InvalidSpec("samples_per_n must be at least 50"));
    }
    let mut all = Vec::new();
    let mut points = Vec::new();
    for &n in n_grid {
        let results = exec.map_trials(samples_per_n, |t| -> Result<RelationSample, RelationError> {
            let s = source(n, t)?;
            let result = match min_linear_relation(&s, spec) {
                Ok(r) => Some(r),
                Err(RelationError::EmptyDomain) => None,
                Err(e) => return Err(e),
            };
            Ok(RelationSample { n, sample: t, result })
        });
        let samples = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mins: Vec<f64> = samples.iter().filter_map(|s| s.result.as_ref().map(|r| r.min_value)).collect();
        let excluded = samples.len() - mins.len();
        if let Some(med) = median(&mins) {
            points.push(RelationScalingPoint { n, median_min: med, samples_used: mins.len(), samples_excluded: excluded });
        }
        all.extend(samples);
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.median_min)).collect();
    let fit = fit_loglog(&xy)?;
    let d = spec.d() as f64;
    Ok((RelationScaling { points, fit, predicted_slope: -(2.0 * d - 1.0) / 2.0 }, all))
}

/// Median-vs-`n` scaling over matrices from `ensemble` (its `n` replaced by
/// each grid value).
pub fn scaling_vs_n<E: TrialExecutor>(
    spec: &RelationSpec,
    ensemble: &EnsembleSpec,
    n_grid: &[usize],
    samples_per_n: u64,
    exec: &E,
) -> Result<(RelationScaling, Vec<RelationSample>), RelationError> {
    scaling_vs_n_with(spec, n_grid, samples_per_n, exec, |n, t| {
        let m = sample_matrix(&ensemble.with_n(n), t)?;
        Ok(decompose(&m, false)?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(v: &[f64]) -> Spectrum {
        Spectrum::from_eigenvalues(v.to_vec())
    }

    #[test]
    fn three_point_pair_sum() {
        let r = min_linear_relation(&sp(&[-3.0, 1.0, 2.0]), &RelationSpec::unfiltered(vec![1.0, 1.0], 0.0)).unwrap();
        assert_eq!(r.min_value, 1.0);
        let mut t = r.argmin_tuple.clone();
        t.sort_by(f64::total_cmp);
        assert_eq!(t, vec![-3.0, 2.0]);
        assert_eq!(r.tuple_count, 6);
    }

    #[test]
    fn single_coordinate_exact_hit() {
        let s = sp(&[-1.0, 0.25, 3.0]);
        let r = min_linear_relation(&s, &RelationSpec::unfiltered(vec![1.0], 0.25)).unwrap();
        assert_eq!(r.min_value, 0.0);
        assert_eq!(r.argmin_tuple, vec![0.25]);
    }

    #[test]
    fn distinct_singular_examples() {
        let r = distinct_singular_gap(&sp(&[-2.0, 2.0005, 5.0]), None, None).unwrap();
        assert!((r.min_value - 0.0005).abs() < 1e-12);
        let r = distinct_singular_gap(&sp(&[-1.7, 1.7]), None, None).unwrap();
        assert_eq!(r.min_value, 0.0);
    }

    #[test]
    fn empty_domain() {
        let s = sp(&[0.0, 0.1]);
        let spec = RelationSpec { coefficients: vec![1.0, 1.0], offset: 0.0, kappa: None, separation: Some(Separation { delta_sep: 1.0, sep_exponent: 1.0 }) };
        assert_eq!(min_linear_relation(&s, &spec), Err(RelationError::EmptyDomain));
        assert_eq!(min_linear_relation(&sp(&[1.0]), &RelationSpec::unfiltered(vec![1.0, 1.0], 0.0)), Err(RelationError::EmptyDomain));
    }

    #[test]
    fn tuple_counts() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(count_admissible_tuples(&v, 2, 0.0), 12);
        assert_eq!(count_admissible_tuples(&v, 2, 1.5), 2 * 3); // (0,2) (0,3) (1,3)
        assert_eq!(count_admissible_tuples(&v, 3, 1.0), 6 * 4);
        assert_eq!(count_admissible_tuples(&v, 3, 1.5), 0);
    }

    #[test]
    fn rejects_zero_coefficient() {
        assert!(min_linear_relation(&sp(&[1.0, 2.0]), &RelationSpec::unfiltered(vec![1.0, 0.0], 0.0)).is_err());
    }
}
