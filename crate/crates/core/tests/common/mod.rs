//! Brute-force references used by the integration tests. Everything here is
//! written directly from the defining integrals, independent of the library's
//! reduced quadrature.
#![allow(dead_code)]

/// `log Σ exp(x_i)`.
pub fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log ∫_lo^hi exp(g(z)) dz` by the composite trapezoid rule.
pub fn log_trapezoid<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let v = g(lo + i as f64 * h);
            if i == 0 || i == n {
                v - std::f64::consts::LN_2
            } else {
                v
            }
        })
        .collect();
    lse(&vals) + h.ln()
}

/// `log E[exp(g(Z))]`, `Z ~ N(0, var)`, on `[-half_width, half_width]`.
pub fn log_gauss_expect<G: Fn(f64) -> f64>(g: G, var: f64, half_width: f64, n: usize) -> f64 {
    let c = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    log_trapezoid(|z| g(z) - z * z / (2.0 * var) + c, -half_width, half_width, n)
}

/// `log L_t(ϑ, z)` for scalar arguments.
pub fn log_l(theta: f64, z: f64, t: f64) -> f64 {
    theta * z - 0.5 * theta * theta * t
}

/// `log F(t, z)` for a scalar market.
pub fn log_f(thetas: &[f64], prior: &[f64], z: f64, t: f64) -> f64 {
    let v: Vec<f64> = thetas.iter().zip(prior).map(|(th, p)| p.ln() + log_l(*th, z, t)).collect();
    lse(&v)
}

fn half_width(thetas: &[f64], gamma: f64, tau: f64) -> f64 {
    let tmax = thetas.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    (gamma.abs() + 2.0) * tmax * tau + 60.0 * tau.sqrt()
}

/// Scenario weights `f_k ∝ ∫ p_k L_T(ϑ_k, z+y) F(T, z+y)^{γ−1} φ_{T−t}(z) dz`
/// for a single asset.
pub fn weights_1d(thetas: &[f64], prior: &[f64], gamma: f64, t: f64, horizon: f64, y: f64) -> Vec<f64> {
    let tau = horizon - t;
    let hw = half_width(thetas, gamma, tau);
    let n = 400_000;
    let logs: Vec<f64> = thetas
        .iter()
        .zip(prior)
        .map(|(th, p)| {
            log_gauss_expect(
                |z| p.ln() + log_l(*th, z + y, horizon) + (gamma - 1.0) * log_f(thetas, prior, z + y, horizon),
                tau,
                hw,
                n,
            )
        })
        .collect();
    let s = lse(&logs);
    logs.iter().map(|v| (v - s).exp()).collect()
}

/// `log ∫ F(T,z)^γ φ_T(z) dz` for a single asset.
pub fn log_expected_power_1d(thetas: &[f64], prior: &[f64], gamma: f64, horizon: f64) -> f64 {
    let hw = half_width(thetas, gamma, horizon);
    log_gauss_expect(|z| gamma * log_f(thetas, prior, z, horizon), horizon, hw, 400_000)
}

/// `∫ F(T,z) ln F(T,z) φ_T(z) dz` for a single asset.
pub fn log_value_1d(thetas: &[f64], prior: &[f64], horizon: f64) -> f64 {
    let hw = half_width(thetas, 1.0, horizon);
    let n = 400_000;
    let h = 2.0 * hw / n as f64;
    let c = -0.5 * (2.0 * std::f64::consts::PI * horizon).ln();
    let mut s = 0.0;
    for i in 0..=n {
        let z = -hw + i as f64 * h;
        let lf = log_f(thetas, prior, z, horizon);
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        s += w * (lf + c - z * z / (2.0 * horizon)).exp() * lf;
    }
    s * h
}

/// The closed form of `J(ỹ)` for `p = ½`, `γ = 2`, scalar market.
pub fn j_closed_form(ytilde: f64, q_exp: f64, th_hi: f64, th_lo: f64, horizon: f64) -> f64 {
    let a = ytilde.powf(1.0 / q_exp);
    let b = (1.0 - ytilde).powf(1.0 / q_exp);
    2f64.powf(2.0 / q_exp - 2.0)
        * (a * a * (horizon * th_hi * th_hi).exp()
            + b * b * (horizon * th_lo * th_lo).exp()
            + 2.0 * a * b * (horizon * th_lo * th_hi).exp())
}

/// Relative difference.
pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Daily GBM closes with `n` prices starting at 100, plus the driving `Y`
/// increments `ΔW + (μ/σ)Δt`.
pub fn synthetic_gbm(mu: f64, sigma: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let dt = 1.0f64 / 252.0;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut prices = vec![100.0];
    let mut dy = Vec::with_capacity(n - 1);
    for i in 1..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let d = dt.sqrt() * z + mu / sigma * dt;
        dy.push(d);
        prices.push(prices[i - 1] * (sigma * d - 0.5 * sigma * sigma * dt).exp());
    }
    (prices, dy)
}

pub fn dates(n: usize) -> Vec<chrono::NaiveDate> {
    let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
}
