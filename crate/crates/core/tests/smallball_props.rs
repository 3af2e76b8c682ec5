mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmt_lab_core::ensemble::EnsembleSpec;
use rmt_lab_core::exec::Serial;
use rmt_lab_core::smallball::*;
use rmt_lab_core::spectral::LocationSet;
use rmt_lab_core::stats::wilson_interval;

fn config(n: usize, lambdas: Vec<f64>, trials: u64, seed: u64) -> SmallBallConfig {
    let d = lambdas.len();
    let locations = LocationSet::new(lambdas, 0.5, 0.1, 1.0, n).unwrap();
    SmallBallConfig { ensemble: EnsembleSpec::goe(n, seed), locations, delta_grid: vec![vec![0.5; d]], trials, ci_level: 0.95 }
}

#[test]
fn zero_and_huge_thresholds() {
    let cfg = config(20, vec![-3.0, 3.0], 50, 1);
    let zero = estimate_joint(&cfg, &[0.0, 0.7], &Serial).unwrap();
    assert_eq!(zero.successes, 0);
    // δ/√n ≥ ‖A‖ + |λ| always holds for δ = (6√n + 3)·√n given ‖A‖ ≤ 6√n here
    let big = (6.0 * 20f64.sqrt() + 3.0) * 20f64.sqrt();
    let all = estimate_joint(&cfg, &[big, big], &Serial).unwrap();
    assert_eq!(all.successes, 50);
    assert_eq!(all.ci_hi, 1.0);
}

#[test]
fn event_inclusion_and_monotonicity() {
    let cfg = config(40, vec![-4.0, 0.0, 4.0], 400, 2);
    let samples = collect_samples(&cfg.ensemble, &cfg.locations.lambdas, cfg.trials, &Serial).unwrap();
    let mut prev: Option<TailEstimate> = None;
    for delta in [0.2, 0.5, 1.0, 2.0, 4.0] {
        let e = samples.estimate(&[delta, delta, delta], 0.95).unwrap();
        assert!(e.per_location_successes.iter().all(|&m| e.successes <= m));
        assert!(e.ci_lo <= e.p_hat && e.p_hat <= e.ci_hi);
        if let Some(p) = &prev {
            assert!(e.successes >= p.successes);
            for i in 0..3 {
                assert!(e.per_location_successes[i] >= p.per_location_successes[i]);
            }
        }
        prev = Some(e);
    }
}

#[test]
fn always_true_second_event_gives_unit_ratio() {
    let cfg = config(30, vec![-2.0, 2.0], 2000, 3);
    let samples = collect_samples(&cfg.ensemble, &cfg.locations.lambdas, cfg.trials, &Serial).unwrap();
    let f = samples.factorization(&[1.0, f64::INFINITY], 0.95).unwrap();
    assert!(f.defined);
    assert_eq!(f.ratio, 1.0);
}

#[test]
fn independent_coins_factorize() {
    let q = [0.3, 0.1, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tally = EventTally::new(3);
    for _ in 0..100_000 {
        let hits: Vec<bool> = q.iter().map(|&p| rng.random::<f64>() < p).collect();
        tally.record(&hits);
    }
    let f = tally.factorization(0.95).unwrap();
    assert!(f.ci_lo <= 1.0 && 1.0 <= f.ci_hi, "{f:?}");
    assert!((f.ratio - 1.0).abs() < 0.1);
}

#[test]
fn zero_marginal_flags_undefined_ratio() {
    let mut tally = EventTally::new(2);
    for _ in 0..10 {
        tally.record(&[true, false]);
    }
    let f = tally.factorization(0.95).unwrap();
    assert!(!f.defined && f.ratio.is_nan());
}

#[test]
fn fit_examples() {
    let est = |p: f64| TailEstimate { successes: 1, trials: 1, p_hat: p, ci_lo: 0.0, ci_hi: 1.0, per_location_successes: vec![1], failed_trials: 0 };
    let f = fit_scaling(&[(0.1, est(0.01)), (0.2, est(0.02)), (0.4, est(0.04))]).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    let f = fit_scaling(&[(0.1, est(0.01)), (0.2, est(0.04)), (0.4, est(0.16))]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12);
    let f = fit_scaling(&[(0.1, est(0.0)), (0.2, est(0.04)), (0.4, est(0.16))]).unwrap();
    assert_eq!((f.points_used, f.points_excluded), (2, 1));
    assert!(fit_scaling(&[(0.1, est(0.0)), (0.2, est(0.04))]).is_err());
}

#[test]
fn wilson_examples() {
    let (lo, hi) = wilson_interval(0, 100, 0.95).unwrap();
    assert_eq!(lo, 0.0);
    assert!((hi - 0.0370).abs() < 5e-4);
    let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
    assert!((lo - 0.404).abs() < 1e-3 && (hi - 0.596).abs() < 1e-3);
    assert_eq!(wilson_interval(100, 100, 0.95).unwrap().1, 1.0);
    assert!(wilson_interval(0, 0, 0.95).is_err());
}

#[test]
fn mesoscopic_sigma_one_matches_macroscopic() {
    let n = 50;
    let meso = MesoscopicConfig {
        ensemble: EnsembleSpec::goe(n, 5),
        n_grid: vec![n],
        center: 0.0,
        d: 2,
        kappa: 0.5,
        delta_sep: 0.4,
        sep_exponent: 1.0,
        delta_grid: vec![vec![1.0, 1.0]],
        trials: 300,
        ci_level: 0.95,
    };
    let rows = mesoscopic_experiment(&meso, &Serial).unwrap();
    let lambdas = mesoscopic_locations(n, 0.0, 2, 0.4, 1.0);
    let cfg = SmallBallConfig {
        ensemble: EnsembleSpec::goe(n, 5),
        locations: LocationSet::new(lambdas.clone(), 0.5, 0.4, 1.0, n).unwrap(),
        delta_grid: vec![vec![1.0, 1.0]],
        trials: 300,
        ci_level: 0.95,
    };
    assert_eq!(rows[0].lambdas, lambdas);
    assert_eq!(rows[0].estimate, estimate_joint(&cfg, &[1.0, 1.0], &Serial).unwrap());
    let geo = mesoscopic_locations(400, 0.0, 2, 1.0, 0.5);
    assert!((geo[1] - geo[0] - 1.0).abs() < 1e-12);
    assert!(LocationSet::new(geo, 0.5, 1.0, 0.5, 400).is_ok());
}

/// Pilot run frozen as the regression baseline: GOE n = 200, λ = 0, δ = 0.5,
/// 2·10⁴ trials, master seed 20240601. Pilot: 6270 successes, p̂ = 0.3135,
/// 95% Wilson CI [0.30711, 0.31996].
const BASELINE_SUCCESSES: u64 = 6270;

#[test]
fn pinned_single_location_baseline() {
    let cfg = config(200, vec![0.0], 20_000, 20240601);
    let e = estimate_joint(&cfg, &[0.5], &Serial).unwrap();
    println!("baseline: successes {} p_hat {} ci [{}, {}]", e.successes, e.p_hat, e.ci_lo, e.ci_hi);
    assert_eq!(e.successes, BASELINE_SUCCESSES);
    assert!((e.ci_lo - 0.30711).abs() < 1e-5 && (e.ci_hi - 0.31996).abs() < 1e-5);
    assert_eq!(e.failed_trials, 0);
    // one-point density at 0 is √n/π on the unnormalized scale, so the
    // probability is close to 2δ/π for small δ
    let predicted = 2.0 * 0.5 / std::f64::consts::PI;
    assert!((e.p_hat - predicted).abs() < 0.05 * predicted);
}

proptest! {
    #[test]
    fn wilson_contains_estimate_and_shrinks(s in 0u64..200, extra in 0u64..200, scale in 2u64..6) {
        let t = s + extra + 1;
        let (lo, hi) = wilson_interval(s, t, 0.95).unwrap();
        let p = s as f64 / t as f64;
        prop_assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        let (lo2, hi2) = wilson_interval(s * scale, t * scale, 0.95).unwrap();
        prop_assert!(hi2 - lo2 <= hi - lo);
    }

    #[test]
    fn tally_inclusion(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..200)) {
        let tally = EventTally::from_indicators(3, rows.iter().map(|r| r.as_slice()));
        let e = tally.estimate(0.95, 0).unwrap();
        for i in 0..3 {
            prop_assert!(e.successes <= tally.marginal(i));
        }
        prop_assert_eq!(e.successes, rows.iter().filter(|r| r.iter().all(|b| *b)).count() as u64);
    }
}
