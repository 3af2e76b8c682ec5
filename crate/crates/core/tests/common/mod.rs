#![allow(dead_code)]

use nalgebra::DMatrix;
use rmt_lab_core::ensemble::{sample_matrix, EnsembleSpec, SampledMatrix};
use rmt_lab_core::spectral::{decompose, Spectrum};

pub fn goe(n: usize, seed: u64, trial: u64) -> SampledMatrix {
    sample_matrix(&EnsembleSpec::goe(n, seed), trial).unwrap()
}

pub fn to_nalgebra(m: &SampledMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n, m.n, &m.data)
}

pub fn spectrum(m: &SampledMatrix, vectors: bool) -> Spectrum {
    decompose(m, vectors).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Singular values of a nalgebra matrix, descending.
pub fn svd_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
