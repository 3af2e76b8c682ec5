//! Entry laws and symmetric matrix sampling.
//!
//! Off-diagonal entries `A[i][j]`, `i < j`, are i.i.d. from an
//! [`EntryDistribution`]; diagonal entries are i.i.d. from `diag_scale` times
//! the same law. Class parameters of the entry law (sub-Gaussian constant,
//! Fourier decay rate, density bound) are properties of the chosen law and are
//! documented on [`EntryKind`] rather than stored.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::rng::{rng_from_seed, trial_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// Centered normal. Sub-Gaussian, Gaussian Fourier decay.
    Gaussian,
    /// Uniform on `[-√(3v), √(3v)]`. Bounded density, no Gaussian component.
    UniformCentered,
    /// `±√v` with equal probability. Atomic; comparison ensemble only.
    Rademacher,
    /// Independent sum of a centered normal with variance `sigma0·v` and a
    /// `base_kind` variable with variance `(1 - sigma0)·v`.
    GaussianDivisible,
}

/// Law of the non-Gaussian summand of a Gaussian-divisible entry. Each is
/// normalized to mean 0 and the requested variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    UniformCentered,
    /// Random sign times an Exp(1) variable (Laplace). Bounded density but only
    /// sub-exponential tails.
    ShiftedExponentialSymmetrized,
    /// `±a` plus independent uniform smoothing on `[-h, h]`, with 90% of the
    /// variance in the atoms. Density bounded by `1/(4h)`.
    TwoPointSmoothed,
}

/// Share of variance carried by the atoms of [`BaseKind::TwoPointSmoothed`].
const TWO_POINT_ATOM_SHARE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: EntryKind,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_kind: Option<BaseKind>,
}

impl EntryDistribution {
    pub fn gaussian(variance: f64) -> Self {
        Self { kind: EntryKind::Gaussian, variance, sigma0: None, base_kind: None }
    }

    pub fn uniform_centered(variance: f64) -> Self {
        Self { kind: EntryKind::UniformCentered, variance, sigma0: None, base_kind: None }
    }

    pub fn rademacher(variance: f64) -> Self {
        Self { kind: EntryKind::Rademacher, variance, sigma0: None, base_kind: None }
    }

    pub fn gaussian_divisible(variance: f64, sigma0: f64, base: BaseKind) -> Self {
        Self { kind: EntryKind::GaussianDivisible, variance, sigma0: Some(sigma0), base_kind: Some(base) }
    }

    /// Default Gaussian-divisible law: `sigma0 = 0.5` with a uniform summand.
    pub fn default_divisible() -> Self {
        Self::gaussian_divisible(1.0, 0.5, BaseKind::UniformCentered)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(EnsembleError::InvalidSpec("entry variance must be positive and finite"));
        }
        match self.kind {
            EntryKind::GaussianDivisible => {
                let s = self.sigma0.ok_or(EnsembleError::InvalidSpec("gaussian_divisible needs sigma0"))?;
                if !(s > 0.0 && s < 1.0) {
                    return Err(EnsembleError::InvalidSpec("sigma0 must lie in (0, 1)"));
                }
                if self.base_kind.is_none() {
                    return Err(EnsembleError::InvalidSpec("gaussian_divisible needs base_kind"));
                }
            }
            _ => {
                if self.sigma0.is_some() || self.base_kind.is_some() {
                    return Err(EnsembleError::InvalidSpec(
                        "sigma0/base_kind only apply to gaussian_divisible",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Whether the law has a Gaussian component and sub-Gaussian tails, i.e.
    /// lies in the class the joint small-ball bounds are proven for.
    pub fn within_hypothesis(&self) -> bool {
        match self.kind {
            EntryKind::Gaussian => true,
            EntryKind::GaussianDivisible => {
                self.base_kind != Some(BaseKind::ShiftedExponentialSymmetrized)
            }
            EntryKind::UniformCentered | EntryKind::Rademacher => false,
        }
    }

    /// Draw the Gaussian summand and the remainder separately. For laws that
    /// are not Gaussian-divisible the first component carries the whole draw
    /// and the second is 0.
    pub fn sample_components<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let v = self.variance;
        match self.kind {
            EntryKind::Gaussian => (math::sqrt(v) * rng.sample::<f64, _>(StandardNormal), 0.0),
            EntryKind::UniformCentered => (uniform_centered(rng, v), 0.0),
            EntryKind::Rademacher => {
                let s = math::sqrt(v);
                (if rng.random::<bool>() { s } else { -s }, 0.0)
            }
            EntryKind::GaussianDivisible => {
                let s0 = self.sigma0.unwrap_or(0.5);
                let g = math::sqrt(s0 * v) * rng.sample::<f64, _>(StandardNormal);
                let rest_var = (1.0 - s0) * v;
                let b = match self.base_kind.unwrap_or(BaseKind::UniformCentered) {
                    BaseKind::UniformCentered => uniform_centered(rng, rest_var),
                    BaseKind::ShiftedExponentialSymmetrized => {
                        // Exp(1) by inversion; Laplace(0, 1) has variance 2.
                        let u: f64 = rng.random();
                        let e = -math::ln(1.0 - u);
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * e * math::sqrt(rest_var / 2.0)
                    }
                    BaseKind::TwoPointSmoothed => {
                        let a = math::sqrt(TWO_POINT_ATOM_SHARE * rest_var);
                        let atom = if rng.random::<bool>() { a } else { -a };
                        atom + uniform_centered(rng, (1.0 - TWO_POINT_ATOM_SHARE) * rest_var)
                    }
                };
                (g, b)
            }
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (a, b) = self.sample_components(rng);
        a + b
    }
}

#[inline]
fn uniform_centered<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    let half_width = math::sqrt(3.0 * variance);
    let u: f64 = rng.random();
    (2.0 * u - 1.0) * half_width
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub entry: EntryDistribution,
    pub diag_scale: f64,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// GOE in the classical convention: unit off-diagonal variance, diagonal
    /// variance 2.
    pub fn goe(n: usize, master_seed: u64) -> Self {
        Self { n, entry: EntryDistribution::gaussian(1.0), diag_scale: core::f64::consts::SQRT_2, master_seed }
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn with_seed(self, master_seed: u64) -> Self {
        Self { master_seed, ..self }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n == 0 {
            return Err(EnsembleError::InvalidSpec("n must be positive"));
        }
        if !(self.diag_scale > 0.0 && self.diag_scale.is_finite()) {
            return Err(EnsembleError::InvalidSpec("diag_scale must be positive and finite"));
        }
        self.entry.validate()
    }

    pub fn trial_seed(&self, trial_index: u64) -> u64 {
        trial_seed(self.master_seed, trial_index)
    }
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    pub n: usize,
    pub data: Vec<f64>,
    pub trial_index: u64,
    pub trial_seed: u64,
}

impl SampledMatrix {
    /// Wrap an explicit symmetric matrix, e.g. a test fixture.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self, EnsembleError> {
        if n == 0 || data.len() != n * n {
            return Err(EnsembleError::InvalidSpec("matrix data must be n*n with n > 0"));
        }
        let m = Self { n, data, trial_index: 0, trial_seed: 0 };
        if !m.is_symmetric() || m.data.iter().any(|x| !x.is_finite()) {
            return Err(EnsembleError::InvalidSpec("matrix must be symmetric and finite"));
        }
        Ok(m)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self { n, data, trial_index: 0, trial_seed: 0 }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..i).all(|j| self.data[i * n + j].to_bits() == self.data[j * n + i].to_bits()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Principal minor on indices `start..n`.
    pub fn trailing_minor(&self, start: usize) -> Self {
        let n = self.n;
        let m = n - start;
        let mut data = Vec::with_capacity(m * m);
        for i in start..n {
            data.extend_from_slice(&self.data[i * n + start..(i + 1) * n]);
        }
        Self { n: m, data, trial_index: self.trial_index, trial_seed: self.trial_seed }
    }
}

/// Sample trial `trial_index` of the ensemble.
///
/// The matrix is grown from its bottom-right corner: step `t` draws the
/// diagonal entry and the off-diagonal row of index `n-1-t`. The `n`-matrix
/// of a trial therefore coincides with the trailing `n`-minor of the
/// `(n+1)`-matrix of the same trial and master seed.
pub fn sample_matrix(spec: &EnsembleSpec, trial_index: u64) -> Result<SampledMatrix, EnsembleError> {
    spec.validate()?;
    let n = spec.n;
    let seed = spec.trial_seed(trial_index);
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; n * n];
    for p in (0..n).rev() {
        data[p * n + p] = spec.diag_scale * spec.entry.sample(&mut rng);
        for q in p + 1..n {
            let x = spec.entry.sample(&mut rng);
            data[p * n + q] = x;
            data[q * n + p] = x;
        }
    }
    Ok(SampledMatrix { n, data, trial_index, trial_seed: seed })
}

/// Sample the `(n+1)`-matrix of `spec` (whose `n` is the larger size) together
/// with its trailing `n`-minor.
pub fn sample_minor_coupled(
    spec: &EnsembleSpec,
    trial_index: u64,
) -> Result<(SampledMatrix, SampledMatrix), EnsembleError> {
    if spec.n < 2 {
        return Err(EnsembleError::InvalidSpec("coupled sampling needs n + 1 >= 2"));
    }
    let full = sample_matrix(spec, trial_index)?;
    let minor = full.trailing_minor(1);
    Ok((full, minor))
}
