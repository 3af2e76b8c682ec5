mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rmt_lab_core::ensemble::{sample_minor_coupled, EnsembleSpec, SampledMatrix};
use rmt_lab_core::spectral::*;

#[test]
fn sigma_min_matches_svd_of_shifted_matrix() {
    for t in 0..100 {
        let m = goe(20, 7, t);
        let s = spectrum(&m, false);
        let lambda = ((t as f64) - 50.0) / 10.0;
        let shifted = to_nalgebra(&m) - DMatrix::identity(20, 20) * lambda;
        let oracle = *svd_desc(&shifted).last().unwrap();
        assert!(rel(sigma_min_at(&s, lambda), oracle) <= 1e-8, "trial {t}");
    }
}

#[test]
fn mu_k_matches_inverse_singular_values() {
    for t in 0..10 {
        let m = goe(30, 8, t);
        let s = spectrum(&m, false);
        let lambda = 0.37 * t as f64;
        let inv = (to_nalgebra(&m) - DMatrix::identity(30, 30) * lambda).try_inverse().unwrap();
        let sv = svd_desc(&inv);
        for k in 1..=30 {
            assert!(rel(mu_k(&s, lambda, k).unwrap(), sv[k - 1]) <= 1e-6, "trial {t} k {k}");
        }
    }
}

#[test]
fn trace_equals_eigenvalue_sum() {
    for t in 0..5 {
        let m = goe(50, 9, t);
        let s = spectrum(&m, false);
        let sum: f64 = s.eigenvalues.iter().sum();
        let scale = s.eigenvalues.iter().map(|e| e.abs()).sum::<f64>();
        assert!((m.trace() - sum).abs() <= 1e-8 * scale.max(1.0));
    }
}

#[test]
fn eigenvalues_match_nalgebra() {
    for n in [1usize, 2, 3, 10, 64] {
        let m = goe(n, 10, n as u64);
        let s = spectrum(&m, true);
        let mut oracle: Vec<f64> = to_nalgebra(&m).symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        let scale = oracle.iter().map(|x| x.abs()).fold(1.0, f64::max);
        for (a, b) in s.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * scale, "n {n}");
        }
    }
}

#[test]
fn eigenvectors_orthonormal_with_small_residual() {
    for n in [5usize, 40, 120] {
        let m = goe(n, 11, 0);
        let s = spectrum(&m, true);
        let v = s.eigenvectors.as_ref().unwrap();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let d: f64 = (0..n).map(|i| v[a * n + i] * v[b * n + i]).sum();
                worst = worst.max((d - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(worst <= 1e-8, "n {n}: {worst}");
        assert!(s.residual_norm <= 1e-8 * (n as f64).sqrt(), "n {n}: {}", s.residual_norm);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn decompose_examples() {
    let s = decompose(&SampledMatrix::diagonal(&[1.0, 2.0, 3.0]), true).unwrap();
    assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
    let v = s.eigenvectors.unwrap();
    for k in 0..3 {
        for i in 0..3 {
            assert_eq!(v[k * 3 + i].abs(), if i == k { 1.0 } else { 0.0 });
        }
    }
    let swap = SampledMatrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let s = decompose(&swap, false).unwrap();
    assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15 && (s.eigenvalues[1] - 1.0).abs() < 1e-15);
}

#[test]
fn minor_spectrum_interlaces() {
    let spec = EnsembleSpec::goe(101, 12);
    for t in 0..3 {
        let (full, minor) = sample_minor_coupled(&spec, t).unwrap();
        let a = spectrum(&full, false).eigenvalues;
        let b = spectrum(&minor, false).eigenvalues;
        let tol = 1e-9 * (100f64).sqrt();
        for i in 0..100 {
            assert!(a[i] <= b[i] + tol && b[i] <= a[i + 1] + tol, "trial {t} index {i}");
        }
    }
}

#[test]
fn c_index_maps_are_inverse_bijections() {
    let s = spectrum(&goe(20, 13, 0), false);
    let (li, lj) = (-1.3, 2.9);
    let p = c_index_permutation(&s, li, lj).unwrap();
    let q = c_index_permutation(&s, lj, li).unwrap();
    let mut seen = p.clone();
    seen.sort();
    assert_eq!(seen, (1..=20).collect::<Vec<_>>());
    for k in 1..=20 {
        assert_eq!(q[p[k - 1] - 1], k);
        assert_eq!(c_index_map(&s, li, lj, k).unwrap(), p[k - 1]);
    }
}

#[test]
fn counting_local_density_in_bulk() {
    // count/(n·η) at E = 0 should sit near ρ_sc(0) = 1/π ≈ 0.318
    let n = 500;
    let mut inside = 0;
    for t in 0..200 {
        let s = spectrum(&goe(n, 14, t), false);
        let c = counting(&s, 0.0, 0.2).unwrap() as f64 / (n as f64 * 0.2);
        if (0.25..=std::f64::consts::PI).contains(&c) {
            inside += 1;
        }
    }
    assert!(inside >= 198, "{inside} of 200");
}

#[test]
fn counting_full_window_and_operator_norm() {
    let n = 60;
    let s = spectrum(&goe(n, 15, 0), false);
    let e = 0.3;
    let eta = 4.0 + 2.0 * e + 2.0;
    assert!(operator_norm(&s) <= (eta / 2.0 - e) * (n as f64).sqrt());
    assert_eq!(counting(&s, e, eta).unwrap(), n);
    assert_eq!(operator_norm(&Spectrum::from_eigenvalues(vec![-3.0, 2.0])), 3.0);
    assert_eq!(operator_norm(&Spectrum::from_eigenvalues(vec![0.0])), 0.0);
}

#[test]
fn delocalization_examples() {
    assert_eq!(delocalization_fraction(&[1.0, 0.0, 0.0, 0.0], 0.1).unwrap(), 0.25);
    let flat = vec![0.5; 4];
    assert_eq!(delocalization_fraction(&flat, 0.5).unwrap(), 1.0);
    assert!(delocalization_fraction(&[0.0; 4], 0.5).is_err());
}

fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..40)
}

proptest! {
    #[test]
    fn mu_nonincreasing_and_reciprocal(values in spectrum_strategy(), lambda in -60.0f64..60.0) {
        let s = Spectrum::from_eigenvalues(values);
        prop_assume!(sigma_min_at(&s, lambda) > 0.0);
        let mus = mu_all(&s, lambda).unwrap();
        prop_assert!(mus.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(mus[0], 1.0 / sigma_min_at(&s, lambda));
        // (1/x)·x is 1 up to one rounding
        prop_assert!((mus[0] * sigma_min_at(&s, lambda) - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn star_norm_dominates_hilbert_schmidt(values in spectrum_strategy(), lambda in -60.0f64..60.0) {
        let s = Spectrum::from_eigenvalues(values);
        prop_assume!(sigma_min_at(&s, lambda) > 0.0);
        let mus = mu_all(&s, lambda).unwrap();
        let hs = mus.iter().map(|m| m * m).sum::<f64>().sqrt();
        let star = star_norm(&s, lambda).unwrap();
        prop_assert!(star.is_finite());
        prop_assert!(star >= hs * (1.0 - 1e-12));
        prop_assert!(star * star - mus[0] * mus[0] >= -1e-9 * star * star);
    }

    #[test]
    fn counting_monotone_in_eta(values in spectrum_strategy(), e in -3.0f64..3.0, a in 0.01f64..4.0, b in 0.01f64..4.0) {
        let s = Spectrum::from_eigenvalues(values);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(counting(&s, e, lo).unwrap() <= counting(&s, e, hi).unwrap());
    }

    #[test]
    fn c_index_inverse(values in prop::collection::vec(-20.0f64..20.0, 2..25), li in -25.0f64..25.0, lj in -25.0f64..25.0) {
        let s = Spectrum::from_eigenvalues(values);
        let p = c_index_permutation(&s, li, lj).unwrap();
        let q = c_index_permutation(&s, lj, li).unwrap();
        for k in 1..=s.n {
            prop_assert_eq!(q[p[k - 1] - 1], k);
        }
    }
}
