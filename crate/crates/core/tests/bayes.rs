use ambmerton_core::bayes::{log_optimal_fraction, optimal_fraction, posterior, scenario_weights, value};
use ambmerton_core::twopoint::{fraction_convex, lower_weight_g, upper_weight};
use ambmerton_core::{MarketModel, Preferences, StrategyQuery, TwoPointModel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench() -> TwoPointModel {
    TwoPointModel::benchmark()
}

fn prefs(alpha: f64) -> Preferences {
    Preferences::bayesian(alpha).unwrap()
}

fn assert_bounds(model: &MarketModel, gamma: f64, kappa: &[f64]) {
    for (k, (lo, hi)) in kappa.iter().zip(model.fraction_bounds(gamma)) {
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        assert!(*k >= lo - tol && *k <= hi + tol, "{k} outside [{lo}, {hi}]");
    }
}

#[test]
fn single_scenario_is_merton() {
    let m = MarketModel::scalar(0.15, &[0.09], vec![1.0]).unwrap();
    for (t, big_t, y) in [(0.0, 10.0, 0.0), (3.0, 10.0, 2.5), (0.0, 400.0, 0.0)] {
        let q = StrategyQuery::new(t, big_t, vec![y]).unwrap();
        let f = optimal_fraction(&m, &prefs(-1.0), &q).unwrap();
        assert!((f.kappa[0] - 0.5 * 0.6 / 0.15).abs() < 1e-14);
    }
}

#[test]
fn short_horizon_limit() {
    let b = bench();
    for alpha in [0.5, -1.0, -5.0] {
        let g = 1.0 / (1.0 - alpha);
        let q = StrategyQuery::initial(1e-4, 1).unwrap();
        let f = optimal_fraction(b.market(), &prefs(alpha), &q).unwrap();
        assert!((f.kappa[0] - g * (0.5 * 0.6 + 0.5 * 0.2) / 0.15).abs() < 1e-3);
    }
}

#[test]
fn benchmark_convex_combination() {
    let b = bench();
    let q = StrategyQuery::initial(10.0, 1).unwrap();
    let f = optimal_fraction(b.market(), &prefs(0.5), &q).unwrap();
    let w = upper_weight(&b, 2.0, &q).unwrap();
    assert!(w > 0.0 && w < 1.0);
    assert!((f.kappa[0] - (w * 8.0 + (1.0 - w) * 8.0 / 3.0)).abs() < 1e-10);
}

#[test]
fn log_investor() {
    let b = bench();
    let q10 = StrategyQuery::initial(10.0, 1).unwrap();
    let q50 = StrategyQuery::initial(50.0, 1).unwrap();
    let k10 = log_optimal_fraction(b.market(), &q10).unwrap();
    let k50 = log_optimal_fraction(b.market(), &q50).unwrap();
    assert!((k10[0] - 8.0 / 3.0).abs() < 1e-14);
    assert!((k10[0] - k50[0]).abs() < 1e-14);
    let near = optimal_fraction(b.market(), &prefs(1e-5), &q10).unwrap();
    assert!((near.kappa[0] - k10[0]).abs() < 1e-4);
}

#[test]
fn long_horizon_concentration_is_monotone() {
    let b = bench();
    let weight = |alpha: f64, big_t: f64, k: usize| {
        let q = StrategyQuery::initial(big_t, 1).unwrap();
        optimal_fraction(b.market(), &prefs(alpha), &q).unwrap().scenario_weights[k]
    };
    for (alpha, k) in [(0.5, 0), (-0.5, 1), (-1.0, 1)] {
        let ws: Vec<f64> = [10.0, 50.0, 100.0, 400.0].iter().map(|&t| weight(alpha, t, k)).collect();
        assert!(ws.windows(2).all(|w| w[1] > w[0]), "α={alpha}: {ws:?}");
        assert!(ws[3] >= 0.99, "α={alpha}: {ws:?}");
    }
}

#[test]
fn posterior_is_probability_vector() {
    let m = MarketModel::scalar(0.2, &[0.1, 0.05, -0.02], vec![0.2, 0.5, 0.3]).unwrap();
    assert_eq!(posterior(&m, 0.0, &[0.0]), m.prior().to_vec());
    for (t, y) in [(1.0, 0.3), (20.0, -4.0), (100.0, 50.0)] {
        let p = posterior(&m, t, &[y]);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn merton_value_for_single_scenario() {
    let m = MarketModel::scalar(0.15, &[0.09], vec![1.0]).unwrap();
    let v = value(&m, &prefs(0.5), 1.0, 10.0).unwrap();
    let exact = (0.5f64 * 0.36 * 10.0 * 0.5 * 2.0).exp() / 0.5;
    assert!(((v - exact) / exact).abs() < 1e-13);
}

#[test]
fn randomized_equivalence_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base = bench();
    for _ in 0..200 {
        let alpha = loop {
            let a: f64 = rng.random_range(-6.0..0.9);
            if a.abs() > 1e-3 {
                break a;
            }
        };
        let p = rng.random_range(0.01..0.99);
        let big_t: f64 = rng.random_range(0.5..60.0);
        let t: f64 = rng.random_range(0.0..big_t);
        let y = rng.random_range(-1.0f64..1.0) * t.sqrt() * 2.0 + 0.4 * t;
        let m = base.with_p(p).unwrap();
        let q = StrategyQuery::new(t, big_t, vec![y]).unwrap();
        let a = optimal_fraction(m.market(), &prefs(alpha), &q).unwrap();
        let b = fraction_convex(&m, 1.0 / (1.0 - alpha), &q).unwrap();
        assert!((a.kappa[0] - b.kappa[0]).abs() < 1e-10, "α={alpha} p={p} T={big_t} t={t} y={y}");
        assert_bounds(m.market(), 1.0 / (1.0 - alpha), &a.kappa);
    }
}

#[test]
fn weight_monotone_in_p_and_y() {
    for alpha in [0.5, -1.0, -5.0] {
        let gs: Vec<f64> = (1..=9)
            .map(|i| lower_weight_g(alpha, i as f64 / 10.0, 10.0, &[0.2], &[0.6]).unwrap())
            .collect();
        assert!(gs.windows(2).all(|w| w[1] < w[0]), "α={alpha}: {gs:?}");
    }
    let b = bench();
    let ws: Vec<f64> = (-20..=20)
        .map(|i| {
            let q = StrategyQuery::new(5.0, 10.0, vec![i as f64 * 0.25]).unwrap();
            upper_weight(&b, 0.5, &q).unwrap()
        })
        .collect();
    assert!(ws.windows(2).all(|w| w[1] >= w[0]));
    let far = StrategyQuery::new(5.0, 10.0, vec![60.0]).unwrap();
    assert!(upper_weight(&b, 0.5, &far).unwrap() > 1.0 - 1e-9);
}

#[test]
fn g_limits_and_sign() {
    assert!((lower_weight_g(-1.0, 0.5, 1e-4, &[0.2], &[0.6]).unwrap() - 0.5).abs() < 1e-3);
    assert!((lower_weight_g(1e-5, 0.5, 10.0, &[0.2], &[0.6]).unwrap() - 0.5).abs() < 1e-4);
    for alpha in [-5.0, -3.0, -1.0, -0.5, 0.25, 0.5, 0.75] {
        for big_t in [1.0, 10.0, 50.0] {
            for p in [0.2, 0.5, 0.8] {
                let d = lower_weight_g(alpha, p, big_t, &[0.2], &[0.6]).unwrap() - (1.0 - p);
                assert!(d * alpha < 0.0, "α={alpha} T={big_t} p={p}: {d}");
            }
        }
    }
}

#[test]
fn representation_identity() {
    let sigma = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.05, 0.15]);
    let m = MarketModel::new(sigma, vec![vec![0.4, 0.1], vec![-0.1, 0.3], vec![0.2, 0.2]], vec![0.3, 0.3, 0.4]).unwrap();
    let q = StrategyQuery::new(2.0, 12.0, vec![0.5, 1.2]).unwrap();
    let f = optimal_fraction(&m, &prefs(-2.0), &q).unwrap();
    let gamma = 1.0 / 3.0;
    let mut mix = [0.0; 2];
    for (k, w) in f.scenario_weights.iter().enumerate() {
        for i in 0..2 {
            mix[i] += w * m.scenario(k)[i];
        }
    }
    let expect = m.apply_sigma_inv_t(&mix);
    for i in 0..2 {
        assert!((f.kappa[i] - gamma * expect[i]).abs() < 1e-10);
    }
    assert!((f.scenario_weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert_bounds(&m, gamma, &f.kappa);
}

fn random_model(d: usize, m: usize, seed: u64) -> MarketModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sigma = DMatrix::zeros(d, d);
    for i in 0..d {
        sigma[(i, i)] = rng.random_range(0.1..0.4);
        for j in 0..i {
            sigma[(i, j)] = rng.random_range(-0.1..0.1);
        }
    }
    let scen: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-0.8..0.8)).collect()).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut prior: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let head: f64 = prior[..m - 1].iter().sum();
    prior[m - 1] = 1.0 - head;
    MarketModel::new(sigma, scen, prior).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn convexity_bounds_hold(
        d in 1usize..=3,
        m in 1usize..=4,
        seed in any::<u64>(),
        alpha in -6.0f64..0.8,
        big_t in 0.1f64..80.0,
        frac in 0.0f64..1.0,
        ys in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        prop_assume!(alpha.abs() > 1e-3);
        let model = random_model(d, m, seed);
        let t = frac * big_t;
        let y: Vec<f64> = ys[..d].iter().map(|v| v * (t.sqrt() + 0.1)).collect();
        let q = StrategyQuery::new(t, big_t, y).unwrap();
        let f = optimal_fraction(&model, &prefs(alpha), &q).unwrap();
        let gamma = 1.0 / (1.0 - alpha);
        for (k, (lo, hi)) in f.kappa.iter().zip(model.fraction_bounds(gamma)) {
            let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            prop_assert!(*k >= lo - tol && *k <= hi + tol);
        }
        prop_assert!((f.scenario_weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let w = scenario_weights(&model, gamma, &q).unwrap();
        prop_assert!(w.iter().all(|v| *v >= 0.0));
    }
}
