mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmt_lab_core::ensemble::{EnsembleSpec, EntryDistribution, SampledMatrix};
use rmt_lab_core::exec::Serial;
use rmt_lab_core::linalg::DenseMatrix;
use rmt_lab_core::oracles::*;

/// Closed form of the orthant volume `{x_i ≥ 1, Πx_i ≤ T}`:
/// `∫_0^{ln T} e^s s^{d−1}/(d−1)! ds`, expanded by parts.
fn orthant_closed_form(d: usize, t: f64) -> f64 {
    let l = t.ln();
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 0..d {
        if k > 0 {
            fact *= k as f64;
        }
        let sign = if (d - 1 - k) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * l.powi(k as i32) / fact;
    }
    let tail = if d % 2 == 0 { 1.0 } else { -1.0 };
    t * sum + tail
}

#[test]
fn distance_identity_on_small_matrices() {
    let r = distance_identity_check(5, 100, 1, &Serial).unwrap();
    assert!(r.max_rel_error <= 1e-10, "{r:?}");
    assert_eq!(r.skipped, 0);
    let worst = distance_identity_instance(5, r.worst_seed).unwrap().unwrap();
    assert_eq!(worst.rel, r.max_rel_error);
    for n in [2usize, 10, 20] {
        let r = distance_identity_check(n, 100, 2, &Serial).unwrap();
        assert!(r.max_rel_error <= 1e-9, "n {n}: {r:?}");
    }
}

#[test]
fn distance_identity_sides_nonnegative_and_diag() {
    for seed in 0..20 {
        let (p, f) = distance_identity_sides(&random_symmetric(6, seed)).unwrap().unwrap();
        assert!(p >= 0.0 && f >= 0.0);
    }
    let (p, f) = distance_identity_sides(&SampledMatrix::diagonal(&[2.0, 3.0])).unwrap().unwrap();
    assert_eq!((p, f), (2.0, 2.0));
    // singular minor is skipped, not reported as an error
    let m = SampledMatrix::from_rows(3, vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(distance_identity_sides(&m).unwrap(), None);
}

#[test]
fn sigma_min_bound_holds() {
    let r = sigma_min_distance_bound_check(10, 200, 3, &Serial).unwrap();
    assert!(r.max_abs_error <= 1e-9, "{r:?}");
    assert_eq!(sigma_min_bound_instance(10, r.worst_seed).unwrap().rel, r.max_rel_error);
    let id = SampledMatrix::diagonal(&[1.0; 5]);
    assert_eq!(sigma_min_bound_violation(&id).unwrap().abs, 0.0);
}

#[test]
fn product_inequality_holds() {
    let r = product_inequality_check(2, 8, 500, 4, &Serial).unwrap();
    assert!(r.max_rel_error <= 1e-9, "{r:?}");
    let r = product_inequality_check(4, 5, 100, 5, &Serial).unwrap();
    assert!(r.max_rel_error <= 1e-9, "{r:?}");
}

#[test]
fn hanson_wright_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = DenseMatrix::gaussian(50, 50, &mut rng);
    let t = hanson_wright_check(&m, &EntryDistribution::gaussian(1.0), 100_000, &[0.0, 1.0, 2.0, 5.0, 10.0], 7, &Serial).unwrap();
    assert!(t.monotone && t.passed, "{t:?}");
    assert!(t.tail_at_four_op < 0.05);
    assert!((t.hs_norm - 50.0).abs() < 5.0);
}

#[test]
fn hanson_wright_identity_extremes() {
    let m = DenseMatrix::identity(100);
    let t = hanson_wright_check(&m, &EntryDistribution::gaussian(1.0), 2000, &[0.0, 20.0], 8, &Serial).unwrap();
    assert_eq!(t.rows[0].frequency, 1.0);
    assert_eq!(t.rows[1].frequency, 0.0);
    assert!(hanson_wright_check(&m, &EntryDistribution::gaussian(2.0), 10, &[0.0], 8, &Serial).is_err());
}

#[test]
fn decoupling_reference_configuration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = DenseMatrix::gaussian(4, 4, &mut rng);
    let m = DenseMatrix::from_rows(4, 4, (0..16).map(|k| 0.5 * (g.get(k / 4, k % 4) + g.get(k % 4, k / 4))).collect());
    let cfg = DecouplingConfig { theta: 0.3, m, u: vec![0.0; 4], entry: EntryDistribution::gaussian(1.0), inner_trials: 10_000, outer_trials: 1_000, seed: 10 };
    let r = decoupling_check(&cfg, &Serial).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.margin >= -3.0 * r.margin_stderr);
}

#[test]
fn decoupling_randomized_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let laws = [EntryDistribution::gaussian(1.0), EntryDistribution::default_divisible()];
    for c in 0..100u64 {
        let n = rng.random_range(1..=6usize);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                m.set(i, j, x);
                m.set(j, i, x);
            }
        }
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let cfg = DecouplingConfig {
            theta: rng.random_range(-1.0..1.0),
            m,
            u,
            entry: laws[(c % 2) as usize],
            inner_trials: 400,
            outer_trials: 200,
            seed: 100 + c,
        };
        let r = decoupling_check(&cfg, &Serial).unwrap();
        assert!(r.margin >= -3.0 * r.margin_stderr - r.bias_bound.min(0.0), "config {c}: {r:?}");
        assert!(r.passed, "config {c}: {r:?}");
    }
}

#[test]
fn region_volume_against_closed_forms() {
    for s in [1.2, 1.5, 2.0] {
        assert!((region_volume_d2(s) - 4.0 * orthant_closed_form(2, s * s)).abs() < 1e-10);
        for d in 3..=4 {
            let exact = (1u64 << d) as f64 * orthant_closed_form(d, (s as f64).powi(d as i32));
            let rec = region_volume_recursive(d, s);
            assert!((rec - exact).abs() <= 1e-9 * exact, "d {d} s {s}: {rec} vs {exact}");
        }
    }
    assert!((region_volume_d2(2.0) - 4.0 * (4.0 * 4f64.ln() - 3.0)).abs() < 1e-12);
}

#[test]
fn region_volume_monte_carlo_agrees() {
    for d in 2..=4 {
        let rows = region_volume_check(d, &[1.3, 1.6, 2.0], 1_000_000, 12, &Serial).unwrap();
        for r in &rows {
            assert!(r.agrees, "{r:?}");
        }
        assert!(rows.windows(2).all(|w| w[0].reference < w[1].reference));
    }
    let rows = region_volume_check(2, &[2.0], 1_000_000, 13, &Serial).unwrap();
    assert!((rows[0].monte_carlo - rows[0].reference).abs() <= 0.02 * rows[0].reference);
    assert!(region_volume_d2(1.0 + 1e-6) < 1e-9);
}

#[test]
fn operator_norm_tail_goe_400() {
    let rows = operator_norm_tail(&EnsembleSpec::goe(400, 14), 1000, &[0.5, 100.0], &Serial).unwrap();
    assert!(rows[0].frequency <= 1e-3, "{rows:?}");
    assert_eq!(rows[1].frequency, 0.0);
    assert!(operator_norm_tail(&EnsembleSpec::goe(10, 1), 50, &[0.0], &Serial).is_err());
}
