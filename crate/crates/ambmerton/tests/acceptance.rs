//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use ambmerton::commands::backtest_config;
use ambmerton::config::resolve;
use ambmerton::io::{export_csv, read_prices, write_prices};
use ambmerton::{parallel, run, Command};
use ambmerton_core::ambiguity::{adjust_prior, dual_constraint, dual_norm_discrete, dual_objective_j};
use ambmerton_core::backtest::{rolling_vol, strategy_path, y_increments, PriceSeries};
use ambmerton_core::bayes::{log_optimal_fraction, optimal_fraction, value};
use ambmerton_core::learning::{
    posterior_sample, value_of_learning, ConstantStrategy, SimulationConfig, TrueModel,
};
use ambmerton_core::numerics::{ExpFamily, Integrator, LogMixture};
use ambmerton_core::precommit::{foc_upper_weight, precommit_fraction, precommit_log_terms};
use ambmerton_core::twopoint::fraction_convex;
use ambmerton_core::{MarketModel, Preferences, StrategyQuery, TwoPointModel};
use common::{j_closed_form, rel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

static BOUND_CHECKS: AtomicUsize = AtomicUsize::new(0);
static BOUND_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);

/// Records one evaluation against `γ min_k ≤ κ ≤ γ max_k` componentwise.
fn check_bounds(model: &MarketModel, gamma: f64, kappa: &[f64]) {
    BOUND_CHECKS.fetch_add(1, Ordering::Relaxed);
    let ok = kappa.iter().zip(model.fraction_bounds(gamma)).all(|(k, (lo, hi))| {
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        *k >= lo - tol && *k <= hi + tol
    });
    if !ok {
        BOUND_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bench() -> TwoPointModel {
    TwoPointModel::benchmark()
}

fn bayes(alpha: f64) -> Preferences {
    Preferences::bayesian(alpha).unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn mgf_suite() -> Outcome {
    let start = Instant::now();
    let integ = Integrator::default_ref();
    let mut worst = 0.0f64;
    for theta in [0.2, 0.6] {
        for gamma in [0.5, 2.0, 4.0] {
            for t in [1.0f64, 10.0, 50.0, 150.0] {
                let mix = LogMixture::new(1, vec![-0.5 * theta * theta * t], vec![theta * t.sqrt()]).unwrap();
                let exact = 0.5 * theta * theta * t * gamma * (gamma - 1.0);
                let mut out = [0.0];
                integ.gauss_hermite(&mix, &[ExpFamily::power(gamma)], &mut out).unwrap();
                let reduced = integ.log_expectation(&mix, &ExpFamily::power(gamma)).unwrap();
                for got in [out[0], reduced] {
                    // relative error of the value from the log-domain result
                    let err = (got - exact).exp_m1().abs();
                    worst = worst.max(err);
                    ensure(err <= 1e-8, || format!("ϑ={theta} γ={gamma} T={t}: rel err {err:e}"))?;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.3} s"))?;
    Ok(format!("24 cases, max rel err {worst:.1e}, {secs:.3} s"))
}

fn equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let base = bench();
    let mut worst = 0.0f64;
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
        let y = rng.random_range(-1.0f64..1.0) * 2.0 * t.sqrt() + 0.4 * t;
        let m = base.with_p(p).unwrap();
        let q = StrategyQuery::new(t, big_t, vec![y]).unwrap();
        let g = 1.0 / (1.0 - alpha);
        let a = optimal_fraction(m.market(), &bayes(alpha), &q).map_err(|e| e.to_string())?;
        let b = fraction_convex(&m, g, &q).map_err(|e| e.to_string())?;
        check_bounds(m.market(), g, &a.kappa);
        check_bounds(m.market(), g, &b.kappa);
        let d = (a.kappa[0] - b.kappa[0]).abs();
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("α={alpha} p={p} T={big_t} t={t} y={y}: diff {d:e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("200 points, max |Δκ| {worst:.1e}, {secs:.2} s"))
}

fn limits() -> Outcome {
    let b = bench();
    // (a) short horizon
    for alpha in [0.5, -1.0, -5.0] {
        let g = 1.0 / (1.0 - alpha);
        let q = StrategyQuery::initial(1e-4, 1).unwrap();
        let f = optimal_fraction(b.market(), &bayes(alpha), &q).unwrap();
        check_bounds(b.market(), g, &f.kappa);
        let lim = g * (0.5 * 0.6 + 0.5 * 0.2) / 0.15;
        ensure((f.kappa[0] - lim).abs() <= 1e-3, || format!("(a) α={alpha}: {} vs {lim}", f.kappa[0]))?;
    }
    // (b/c) long horizon, thresholds checked against brute-force weights
    let mut min_w = 1.0f64;
    for (alpha, k) in [(0.5, 0usize), (-0.5, 1), (-1.0, 1)] {
        let g = 1.0 / (1.0 - alpha);
        let brute = common::weights_1d(&[0.6, 0.2], &[0.5, 0.5], g, 0.0, 400.0, 0.0);
        ensure(brute[k] >= 0.99, || format!("(b/c) brute-force weight {} < 0.99 at α={alpha}", brute[k]))?;
        let q = StrategyQuery::initial(400.0, 1).unwrap();
        let f = optimal_fraction(b.market(), &bayes(alpha), &q).unwrap();
        check_bounds(b.market(), g, &f.kappa);
        let w = f.scenario_weights[k];
        ensure(w >= 0.99, || format!("(b/c) α={alpha}: weight {w}"))?;
        ensure((w - brute[k]).abs() < 1e-6, || format!("(b/c) α={alpha}: {w} vs brute {}", brute[k]))?;
        min_w = min_w.min(w);
    }
    // (e) near-log investor
    let q = StrategyQuery::initial(10.0, 1).unwrap();
    let near = optimal_fraction(b.market(), &bayes(1e-5), &q).unwrap();
    check_bounds(b.market(), 1.0 / (1.0 - 1e-5), &near.kappa);
    let log = log_optimal_fraction(b.market(), &q).unwrap();
    let d = (near.kappa[0] - log[0]).abs();
    ensure(d <= 1e-4, || format!("(e) |κ(α=1e-5) − κ_log| = {d:e}"))?;
    Ok(format!("(a) ok, (b/c) min weight {min_w:.5}, (e) gap {d:.1e}"))
}

/// Fine scan plus golden-section refinement of `f` on `[lo, hi]`.
fn grid_argmax<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let (mut best, mut bx) = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let v = f(x);
        if v > best {
            best = v;
            bx = x;
        }
    }
    let (mut a, mut c) = ((bx - h).max(lo), (bx + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = c - g * (c - a);
        let x2 = a + g * (c - a);
        if f(x1) > f(x2) {
            c = x2;
        } else {
            a = x1;
        }
    }
    0.5 * (a + c)
}

fn precommitment() -> Outcome {
    let b = bench();
    let mut worst_foc = 0.0f64;
    for alpha in [0.5, -0.5, -1.0, -5.0] {
        for t in [1.0, 10.0, 50.0] {
            let r = precommit_fraction(&b, alpha, t).map_err(|e| e.to_string())?;
            worst_foc = worst_foc.max(r.foc_residual);
            ensure(r.foc_residual <= 1e-10, || format!("FOC residual {:e} at α={alpha} T={t}", r.foc_residual))?;
        }
    }
    let mut worst_direct = 0.0f64;
    for (alpha, t) in [(-1.0, 10.0), (0.5, 10.0), (-5.0, 20.0), (0.5, 50.0), (-0.5, 1.0)] {
        let r = precommit_fraction(&b, alpha, t).unwrap();
        let g = 1.0 / (1.0 - alpha);
        let score = |k: f64| {
            let v = precommit_log_terms(&b, alpha, t, &[k]);
            common::lse(&v) / alpha
        };
        let direct = grid_argmax(score, g * 0.2 / 0.15 - 0.5, g * 0.6 / 0.15 + 0.5);
        let d = (r.kappa_pre[0] - direct).abs();
        worst_direct = worst_direct.max(d);
        ensure(d <= 1e-6, || format!("α={alpha} T={t}: {} vs direct {direct}", r.kappa_pre[0]))?;
    }
    for alpha in [0.5, -1.0, -4.0] {
        let g = 1.0 / (1.0 - alpha);
        let r = precommit_fraction(&b, alpha, 1e-4).unwrap();
        let lim = g * (0.5 * 4.0 + 0.5 * 4.0 / 3.0);
        ensure((r.kappa_pre[0] - lim).abs() <= 1e-3, || format!("T→0 α={alpha}: {}", r.kappa_pre[0]))?;
    }
    let long = precommit_fraction(&b, 0.5, 400.0).unwrap();
    ensure((long.kappa_pre[0] - 8.0).abs() <= 1e-2, || format!("T=400: {}", long.kappa_pre[0]))?;
    let mut worst_var = 0.0f64;
    for alpha in [0.5, -2.0] {
        for k in [0.3, 1.7, 6.0] {
            let full = precommit_log_terms(&b, alpha, 15.0, &[k]);
            let w_full = (full[0] - common::lse(&full)).exp();
            let d = (foc_upper_weight(&b, alpha, 15.0, &[k]) - w_full).abs();
            worst_var = worst_var.max(d);
            ensure(d <= 1e-14, || format!("variance cancellation α={alpha} κ={k}: {d:e}"))?;
        }
    }
    Ok(format!(
        "FOC {worst_foc:.1e}, direct {worst_direct:.1e}, T=400 κ {:.5}, cancellation {worst_var:.1e}",
        long.kappa_pre[0]
    ))
}

fn random_simplex(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn ambiguity() -> Outcome {
    let b = bench();
    let mut worst_j = 0.0f64;
    for lambda in [0.75, 0.25, -0.5, 0.9] {
        let prefs = Preferences::new(0.5, lambda).unwrap();
        for t in [1.0, 10.0, 50.0] {
            for i in 1..=9 {
                let y = i as f64 / 10.0;
                let got = dual_objective_j(y, &b, 2.0, t, &prefs).unwrap();
                let r = rel(got, j_closed_form(y, prefs.q_exp(), 0.6, 0.2, t));
                worst_j = worst_j.max(r);
                ensure(r <= 1e-8, || format!("J at λ={lambda} T={t} ỹ={y}: rel {r:e}"))?;
            }
        }
    }
    for alpha in [0.5, -1.0, -3.0] {
        for p in [0.3, 0.5] {
            let adj = adjust_prior(&b.with_p(p).unwrap(), &bayes(alpha), 10.0).unwrap();
            ensure((adj.p_mod - p).abs() <= 1e-12, || format!("λ=α={alpha}: p_mod {}", adj.p_mod))?;
        }
    }
    let grid: Vec<f64> = (0..20).map(|i| -20.0 + i as f64 * 20.9 / 19.0).collect();
    for t in [10.0, 20.0, 50.0] {
        let pm = grid
            .iter()
            .map(|&l| adjust_prior(&b, &Preferences::new(-3.0, l).unwrap(), t).map(|a| a.p_mod))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        ensure(pm.windows(2).all(|w| w[1] >= w[0]), || format!("p_mod not monotone at T={t}: {pm:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_dual = 0.0f64;
    for (lo, hi) in [(1.05f64, 6.0f64), (0.05, 0.95), (-6.0, -0.05)] {
        for _ in 0..100 {
            let m = rng.random_range(2..6);
            let probs = random_simplex(&mut rng, m);
            let values: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..5.0)).collect();
            let pe: f64 = rng.random_range(lo..hi);
            let r = dual_norm_discrete(&values, &probs, pe).map_err(|e| e.to_string())?;
            let direct = values.iter().zip(&probs).map(|(x, p)| p * x.powf(pe)).sum::<f64>().powf(1.0 / pe);
            let d = rel(r.dual_value, direct);
            worst_dual = worst_dual.max(d);
            ensure(d <= 1e-8, || format!("dual norm 𝐩={pe}: rel {d:e}"))?;
            let c = dual_constraint(&r.q_star, &probs, pe / (pe - 1.0));
            ensure((c - 1.0).abs() < 1e-10, || format!("dual weights infeasible: {c}"))?;
        }
    }
    Ok(format!("J rel {worst_j:.1e}, 3 λ-grids monotone, dual norm rel {worst_dual:.1e}"))
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let b = bench();
    let alpha = -1.0;
    let prefs = bayes(alpha);
    let g = prefs.gamma();
    let big_t = 10.0;
    let cfg = SimulationConfig::with_dt(100_000, big_t, 0.01, 17).unwrap();
    let dt = big_t / cfg.n_steps as f64;
    let table = parallel::tabulate(b.market(), cfg.n_steps, dt, |t, y| {
        let q = StrategyQuery::new(t, big_t, vec![y])?;
        Ok(optimal_fraction(b.market(), &prefs, &q)?.kappa[0])
    })
    .map_err(|e| e.to_string())?;
    for row in table.rows() {
        for v in &row.values {
            check_bounds(b.market(), g, &[*v]);
        }
    }
    let learn = parallel::simulate(b.market(), &prefs, &table, 1.0, big_t, &cfg).map_err(|e| e.to_string())?;
    let exact = value(b.market(), &prefs, 1.0, big_t).unwrap();
    let z_value = (learn.mixture.mean - exact) / learn.mixture.se;
    ensure(z_value.abs() <= 3.0, || format!("learning {:?} vs value {exact}", learn.mixture))?;

    let pre = precommit_fraction(&b, alpha, big_t).unwrap();
    let fixed = parallel::simulate(b.market(), &prefs, &ConstantStrategy(pre.kappa_pre), 1.0, big_t, &cfg)
        .map_err(|e| e.to_string())?;
    let gap_se = (learn.mixture.se.powi(2) + fixed.mixture.se.powi(2)).sqrt();
    let z_gap = (learn.mixture.mean - fixed.mixture.mean) / gap_se;
    ensure(z_gap >= -3.0, || format!("pre-commitment beats learning: z = {z_gap:.2}"))?;

    let p = b.p();
    let mut zs = Vec::new();
    for t in [5.0, 10.0] {
        let up = posterior_sample(&b, t, TrueModel::Model1, 100_000, 31).unwrap();
        let down = posterior_sample(&b, t, TrueModel::Model2, 100_000, 32).unwrap();
        let (m1, s1) = mean_se(&up.samples);
        let (m2, s2) = mean_se(&down.samples);
        let mix = p * m1 + (1.0 - p) * m2;
        let se = ((p * s1).powi(2) + ((1.0 - p) * s2).powi(2)).sqrt();
        let z = (mix - p) / se;
        ensure(z.abs() <= 3.0, || format!("E[p̂_{t}] = {mix} ± {se}"))?;
        zs.push(z);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "value z {z_value:+.2}, learning − precommit z {z_gap:+.2}, martingale z {:+.2}/{:+.2}, {secs:.1} s",
        zs[0], zs[1]
    ))
}

fn learning_value() -> Outcome {
    let b = bench();
    for p in [0.0, 1.0] {
        let v = value_of_learning(&b.with_p(p).unwrap(), 10.0).unwrap();
        ensure(v.abs() <= 1e-10, || format!("value of learning {v:e} at p={p}"))?;
    }
    let vs: Vec<f64> = [5.0, 10.0, 20.0, 40.0].iter().map(|&t| value_of_learning(&b, t).unwrap()).collect();
    ensure(vs.iter().all(|v| *v >= 0.0), || format!("negative: {vs:?}"))?;
    ensure(vs.windows(2).all(|w| w[1] > w[0]), || format!("not increasing: {vs:?}"))?;
    let grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let vals: Vec<f64> = grid.iter().map(|&p| value_of_learning(&b.with_p(p).unwrap(), 10.0).unwrap()).collect();
    let i = (0..vals.len()).fold(0, |a, i| if vals[i] > vals[a] { i } else { a });
    ensure((0.4..=0.6).contains(&grid[i]), || format!("argmax p = {}", grid[i]))?;
    Ok(format!("T-profile {:.2e}..{:.2e}, argmax p = {:.2}", vs[0], vs[3], grid[i]))
}

fn backtest() -> Outcome {
    let n = 3500;
    let (prices, dy) = common::synthetic_gbm(0.06, 0.15, n, 2025);
    let series = PriceSeries::new(common::dates(n), prices).unwrap();
    let mut cfg = resolve(None, None, &[]).unwrap();
    cfg.prefs.alpha = -5.0;
    cfg.prefs.lambda = Some(-8.0);
    cfg.query.horizon = 15.0;
    let bc = backtest_config(&cfg).map_err(|e| e.to_string())?;

    let vols = vec![0.15; n - bc.window];
    let y = y_increments(&series, &vols, &bc).map_err(|e| e.to_string())?;
    let mut worst_y = 0.0f64;
    for j in 1..y.len() {
        let d = (y[j] - y[j - 1] - dy[bc.window + j - 1]).abs();
        worst_y = worst_y.max(d);
    }
    ensure(worst_y <= 1e-10, || format!("Y reconstruction error {worst_y:e}"))?;

    let sig = rolling_vol(&series, &bc).map_err(|e| e.to_string())?;
    let mean = sig.iter().sum::<f64>() / sig.len() as f64;
    let worst_sig = sig.iter().map(|s| (s / 0.15 - 1.0).abs()).fold(0.0, f64::max);
    ensure((mean / 0.15 - 1.0).abs() <= 0.1, || format!("mean σ̂ {mean}"))?;

    let sp = strategy_path(&series, &bc).map_err(|e| e.to_string())?;
    let g = bc.prefs.gamma();
    for r in &sp.rows {
        let m = TwoPointModel::scalar(bc.mu_hi, bc.mu_lo, r.sigma_hat, bc.p).unwrap();
        check_bounds(m.market(), g, &[r.kappa_learning]);
        if let Some(k) = r.kappa_ambiguity {
            check_bounds(m.market(), g, &[k]);
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = dir.path().join("prices.csv");
    let mut text = Vec::new();
    write_prices(&series, &mut text).map_err(|e| e.to_string())?;
    std::fs::write(&file, &text).map_err(|e| e.to_string())?;
    cfg.backtest.prices = Some(file);
    let a = run(Command::Backtest, &cfg).map_err(|e| e.to_string())?.text;
    let b = run(Command::Backtest, &cfg).map_err(|e| e.to_string())?.text;
    ensure(a == b, || "backtest output differs between runs".into())?;
    let reread = read_prices(&text[..]).map_err(|e| e.to_string())?;
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    export_csv(&strategy_path(&reread, &bc).unwrap(), &mut e1).unwrap();
    export_csv(&strategy_path(&reread, &bc).unwrap(), &mut e2).unwrap();
    ensure(e1 == e2, || "export differs between runs".into())?;
    Ok(format!(
        "Y err {worst_y:.1e}, mean σ̂ {mean:.4} (max rel dev {:.1}%), {} path rows, reruns identical",
        100.0 * worst_sig,
        sp.rows.len()
    ))
}

fn bounds_summary(inner: Outcome) -> Outcome {
    let detail = inner?;
    let checks = BOUND_CHECKS.load(Ordering::Relaxed);
    let bad = BOUND_VIOLATIONS.load(Ordering::Relaxed);
    ensure(bad == 0, || format!("{bad} of {checks} evaluations outside the Merton bounds"))?;
    Ok(format!("{detail}; (d) {checks} evaluations within bounds"))
}

fn guarded(f: fn() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    }
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "MGF oracle suite", mgf_suite),
        (2, "representation equivalence", equivalence),
        (3, "limit suite", limits),
        (4, "pre-commitment", precommitment),
        (5, "ambiguity", ambiguity),
        (6, "Monte Carlo consistency", monte_carlo),
        (7, "value of learning", learning_value),
        (8, "backtest", backtest),
    ];
    // every criterion feeds the bound counter, so (d) is settled last
    let mut results: Vec<Outcome> = criteria.iter().map(|(_, _, f)| guarded(*f)).collect();
    results[2] = bounds_summary(results[2].clone());

    let mut failed = 0;
    for ((id, name, _), r) in criteria.iter().zip(&results) {
        match r {
            Ok(d) => println!("criterion {id} PASS: {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id} FAIL: {name}: {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
