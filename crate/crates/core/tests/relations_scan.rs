mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmt_lab_core::ensemble::EnsembleSpec;
use rmt_lab_core::exec::Serial;
use rmt_lab_core::relations::*;
use rmt_lab_core::spectral::Spectrum;

/// Exhaustive oracle over ordered tuples of distinct indices; the relation is
/// summed left to right like the scan.
fn brute_force(values: &[f64], n: usize, spec: &RelationSpec) -> Option<(f64, u128)> {
    let edge = spec.kappa.map(|k| (2.0 - k) * (n as f64).sqrt());
    let adm: Vec<f64> = values.iter().copied().filter(|x| edge.is_none_or(|e| x.abs() <= e)).collect();
    let gap = spec.separation.map_or(0.0, |s| s.delta_sep * (n as f64).powf(s.sep_exponent - 0.5));
    let d = spec.coefficients.len();
    let mut best = f64::INFINITY;
    let mut count = 0u128;
    let mut idx = vec![0usize; d];
    let m = adm.len();
    if m == 0 {
        return None;
    }
    'outer: loop {
        let distinct = (0..d).all(|i| (i + 1..d).all(|j| idx[i] != idx[j] && (adm[idx[i]] - adm[idx[j]]).abs() >= gap));
        if distinct {
            count += 1;
            let mut s = 0.0;
            for i in 0..d {
                s += spec.coefficients[i] * adm[idx[i]];
            }
            best = best.min((s - spec.offset).abs());
        }
        let mut p = d;
        loop {
            if p == 0 {
                break 'outer;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < m {
                continue 'outer;
            }
            idx[p] = 0;
        }
    }
    (count > 0).then_some((best, count))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Spectrum, RelationSpec) {
    let n = rng.random_range(2..=40usize);
    let sn = (n as f64).sqrt();
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.2..2.2) * sn).collect();
    let d = rng.random_range(2..=3usize);
    let coefficients: Vec<f64> = (0..d)
        .map(|_| {
            let a: f64 = rng.random_range(0.25..3.0);
            if rng.random::<bool>() { a } else { -a }
        })
        .collect();
    let offset = rng.random_range(-2.0..2.0) * sn;
    let kappa = rng.random::<bool>().then(|| rng.random_range(0.1..1.5));
    let separation = rng.random::<bool>().then(|| Separation { delta_sep: rng.random_range(0.01..0.6), sep_exponent: rng.random_range(0.3..1.0) });
    (Spectrum::from_eigenvalues(values), RelationSpec { coefficients, offset, kappa, separation })
}

#[test]
fn scan_equals_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 200 {
        let (s, spec) = random_instance(&mut rng);
        let oracle = brute_force(&s.eigenvalues, s.n, &spec);
        match (min_linear_relation(&s, &spec), oracle) {
            (Ok(r), Some((best, count))) => {
                assert_eq!(r.min_value, best, "{spec:?}");
                assert_eq!(r.tuple_count, count);
                // argmin is admissible and attains the minimum
                let v = relation_value(&spec.coefficients, &r.argmin_tuple, spec.offset);
                assert_eq!(v, best);
                checked += 1;
            }
            (Err(RelationError::EmptyDomain), None) => {}
            (got, want) => panic!("mismatch: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn generic_extension_point_agrees_for_linear_relations() {
    let s = Spectrum::from_eigenvalues(vec![-3.0, -1.2, 0.4, 1.0, 2.5]);
    let spec = RelationSpec::unfiltered(vec![1.0, -2.0], 0.5);
    let a = min_linear_relation(&s, &spec).unwrap();
    let b = min_relation_by(&s, 2, None, None, |x| (x[0] - 2.0 * x[1] - 0.5).abs()).unwrap();
    assert_eq!(a.min_value, b.min_value);
    assert_eq!(a.tuple_count, b.tuple_count);
}

#[test]
fn uniform_points_sum_statistic_scales_like_n_to_minus_three_halves() {
    let spec = RelationSpec::unfiltered(vec![1.0, 1.0], 0.0);
    let source = |n: usize, t: u64| -> Result<Spectrum, RelationError> {
        let mut rng = ChaCha8Rng::seed_from_u64(rmt_lab_core::rng::trial_seed(n as u64, t));
        let r = 2.0 * (n as f64).sqrt();
        Ok(Spectrum::from_eigenvalues((0..n).map(|_| rng.random_range(-r..r)).collect()))
    };
    let (scaling, _) = scaling_vs_n_with(&spec, &[100, 200, 400, 800], 500, &Serial, source).unwrap();
    assert!((scaling.fit.slope + 1.5).abs() <= 0.2, "{:?}", scaling.fit);
    assert_eq!(scaling.predicted_slope, -1.5);
}

#[test]
fn single_eigenvalue_spacing_scale() {
    // d = 1, c = 0.3√n: distance from a fixed bulk point to the spectrum
    let spec = RelationSpec::unfiltered(vec![1.0], 0.0);
    let source = |n: usize, t: u64| -> Result<Spectrum, RelationError> {
        let m = rmt_lab_core::ensemble::sample_matrix(&EnsembleSpec::goe(n, 31), t)?;
        let mut s = rmt_lab_core::spectral::decompose(&m, false)?;
        let shift = 0.3 * (n as f64).sqrt();
        s.eigenvalues.iter_mut().for_each(|e| *e -= shift);
        Ok(s)
    };
    let (scaling, _) = scaling_vs_n_with(&spec, &[50, 100, 200], 60, &Serial, source).unwrap();
    assert!((scaling.fit.slope + 0.5).abs() <= 0.2, "{:?}", scaling.fit);
}

#[test]
fn scaling_rejects_small_designs() {
    let spec = RelationSpec::unfiltered(vec![1.0, 1.0], 0.0);
    let ens = EnsembleSpec::goe(10, 1);
    assert!(scaling_vs_n(&spec, &ens, &[10, 20], 50, &Serial).is_err());
    assert!(scaling_vs_n(&spec, &ens, &[10, 20, 30], 10, &Serial).is_err());
}

fn values_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-12.0f64..12.0, 2..25)
}

proptest! {
    #[test]
    fn scaling_coefficients_scales_minimum(values in values_strategy(), a1 in 0.5f64..2.0, a2 in -2.0f64..-0.5, c in -5.0f64..5.0, gamma_exp in -3i32..4) {
        let s = Spectrum::from_eigenvalues(values);
        // powers of two keep the scaled sums exact
        let gamma = 2f64.powi(gamma_exp) * if gamma_exp % 2 == 0 { 1.0 } else { -1.0 };
        let base = min_linear_relation(&s, &RelationSpec::unfiltered(vec![a1, a2], c)).unwrap();
        let scaled = min_linear_relation(&s, &RelationSpec::unfiltered(vec![gamma * a1, gamma * a2], gamma * c)).unwrap();
        prop_assert_eq!(scaled.min_value, gamma.abs() * base.min_value);
        prop_assert_eq!(scaled.argmin_tuple, base.argmin_tuple);
    }

    #[test]
    fn filters_never_decrease_minimum(values in values_strategy(), c in -3.0f64..3.0, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, k1 in 0.05f64..1.9, k2 in 0.05f64..1.9) {
        let n = values.len();
        let s = Spectrum::from_eigenvalues(values);
        let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (klo, khi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let loose = RelationSpec { coefficients: vec![1.0, 1.0], offset: c, kappa: Some(klo), separation: Some(Separation { delta_sep: dlo.max(1e-9), sep_exponent: 1.0 }) };
        let tight = RelationSpec { kappa: Some(khi), separation: Some(Separation { delta_sep: dhi.max(1e-9), sep_exponent: 1.0 }), ..loose.clone() };
        let _ = n;
        if let Ok(t) = min_linear_relation(&s, &tight) {
            let l = min_linear_relation(&s, &loose).unwrap();
            prop_assert!(t.min_value >= l.min_value);
            prop_assert!(t.tuple_count <= l.tuple_count);
        }
    }

    #[test]
    fn pair_sum_symmetric_under_negation(values in values_strategy()) {
        let s = Spectrum::from_eigenvalues(values.clone());
        let neg = Spectrum::from_eigenvalues(values.iter().map(|x| -x).collect());
        let a = distinct_singular_gap(&s, None, None).unwrap();
        let b = distinct_singular_gap(&neg, None, None).unwrap();
        prop_assert_eq!(a.min_value, b.min_value);
    }

    #[test]
    fn ordered_and_unordered_minimum_agree(values in values_strategy(), c in -3.0f64..3.0) {
        // symmetric coefficients: the minimum over ordered tuples equals the
        // minimum over increasing index pairs
        let s = Spectrum::from_eigenvalues(values.clone());
        let r = min_linear_relation(&s, &RelationSpec::unfiltered(vec![1.0, 1.0], c)).unwrap();
        let v = &s.eigenvalues;
        let mut best = f64::INFINITY;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                best = best.min((v[i] + v[j] - c).abs());
            }
        }
        prop_assert_eq!(r.min_value, best);
    }
}
