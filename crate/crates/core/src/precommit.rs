//! Optimal constant (pre-commitment) fraction for the two-point prior.
//!
//! For constant `κ` wealth is lognormal in each scenario, so
//! `E[u(X_T)] = (x₀^α/α) Σ_k p_k exp(α(κ·μ_k − ½(1−α)κᵀΣκ)T)` with `Σ = σσᵀ`.
//! The first-order condition reads `κ = γ Σ_k w_k(κ) (σᵀ)⁻¹ϑ_k` with softmax
//! weights `w_k ∝ p_k e^{ακ·μ_k T}`; the variance term is common to both
//! scenarios and cancels. Every solution lies on the segment between the two
//! Merton fractions, so the problem reduces to a scalar fixed point in the
//! upper weight `w`.

use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::numerics::{find_root, log_sum_exp_slice, Interval};
use crate::twopoint::TwoPointModel;

const DAMPING: f64 = 0.5;
const FIXED_POINT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 100_000;
const ROOT_SCAN: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct PrecommitResult {
    pub kappa_pre: Vec<f64>,
    /// Max-norm of `κ − RHS(κ)` at the solution.
    pub foc_residual: f64,
    /// Softmax weight on `κ^Mer(γ, ϑ̄)`.
    pub upper_weight_pre: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha < 1.0) || alpha == 0.0 || !alpha.is_finite() {
        return Err(invalid("alpha must satisfy alpha < 1, alpha != 0"));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `κᵀ σσᵀ κ`.
fn variance(model: &TwoPointModel, kappa: &[f64]) -> f64 {
    let st = model.market().sigma().transpose() * DVector::from_column_slice(kappa);
    st.norm_squared()
}

/// Scenario exponents `log p_k + α(κ·μ_k − ½(1−α)κᵀΣκ)T`.
pub fn precommit_log_terms(model: &TwoPointModel, alpha: f64, horizon: f64, kappa: &[f64]) -> [f64; 2] {
    let var = variance(model, kappa);
    let p = model.p();
    let e = |mu: &[f64]| alpha * (dot(kappa, mu) - 0.5 * (1.0 - alpha) * var) * horizon;
    [p.ln() + e(&model.mu_hi()), (1.0 - p).ln() + e(&model.mu_lo())]
}

/// Expected utility of holding the constant fraction `κ` up to `T`.
pub fn precommit_value(model: &TwoPointModel, alpha: f64, x0: f64, horizon: f64, kappa: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x0 > 0.0) || !(horizon >= 0.0) || kappa.len() != model.dim() {
        return Err(invalid("need x0 > 0, T >= 0 and one fraction per asset"));
    }
    let lse = log_sum_exp_slice(&precommit_log_terms(model, alpha, horizon, kappa));
    let v = (alpha * x0.ln() + lse).exp() / alpha;
    if !v.is_finite() {
        return Err(Error::NumericOverflow {
            context: "precommit_value",
            node: kappa.to_vec(),
        });
    }
    Ok(v)
}

/// Softmax weight on the upper scenario, `p e^{ακ·μ̄T} / Σ`.
pub fn foc_upper_weight(model: &TwoPointModel, alpha: f64, horizon: f64, kappa: &[f64]) -> f64 {
    let p = model.p();
    if p == 0.0 || p == 1.0 {
        return p;
    }
    let a = p.ln() + alpha * dot(kappa, &model.mu_hi()) * horizon;
    let b = (1.0 - p).ln() + alpha * dot(kappa, &model.mu_lo()) * horizon;
    logistic(a - b)
}

/// Right-hand side of the first-order condition.
pub fn foc_rhs(model: &TwoPointModel, alpha: f64, horizon: f64, kappa: &[f64]) -> Vec<f64> {
    let w = foc_upper_weight(model, alpha, horizon, kappa);
    segment(model, 1.0 / (1.0 - alpha), w)
}

fn segment(model: &TwoPointModel, gamma: f64, w: f64) -> Vec<f64> {
    let hi = model.market().merton_fraction(gamma, 0);
    let lo = model.market().merton_fraction(gamma, 1);
    hi.iter().zip(&lo).map(|(a, b)| w * a + (1.0 - w) * b).collect()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damped fixed-point iteration `κ ← (1−ω)κ + ω RHS(κ)` from the `T → 0` limit.
pub fn precommit_fixed_point(model: &TwoPointModel, alpha: f64, horizon: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let gamma = 1.0 / (1.0 - alpha);
    let mut kappa = segment(model, gamma, model.p());
    for _ in 0..MAX_ITER {
        let rhs = foc_rhs(model, alpha, horizon, &kappa);
        let next: Vec<f64> = kappa
            .iter()
            .zip(&rhs)
            .map(|(k, r)| (1.0 - DAMPING) * k + DAMPING * r)
            .collect();
        let step = max_abs_diff(&next, &kappa);
        kappa = next;
        if step <= FIXED_POINT_TOL {
            return Ok(kappa);
        }
        if kappa.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::Convergence {
        context: "pre-commitment fixed point".into(),
        iterations: MAX_ITER,
    })
}

/// Optimal pre-commitment fraction.
///
/// The damped iteration is tried first. Independently, every root of the
/// scalar residual `w − s(w)` on `[0, 1]` is bracketed and polished; the
/// candidate with the largest closed-form value wins, which also handles the
/// several FOC roots that appear for `α > 0` at long horizons.
pub fn precommit_fraction(model: &TwoPointModel, alpha: f64, horizon: f64) -> Result<PrecommitResult> {
    check_alpha(alpha)?;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be finite and non-negative"));
    }
    let gamma = 1.0 / (1.0 - alpha);
    let mut candidates: Vec<f64> = Vec::new();
    if let Ok(k) = precommit_fixed_point(model, alpha, horizon) {
        candidates.push(foc_upper_weight(model, alpha, horizon, &k));
    }

    let p = model.p();
    if p == 0.0 || p == 1.0 {
        candidates.push(p);
    } else {
        let residual = |w: f64| w - foc_upper_weight(model, alpha, horizon, &segment(model, gamma, w));
        let mut prev_w = 0.0;
        let mut prev_r = residual(0.0);
        for i in 1..=ROOT_SCAN {
            let w = i as f64 / ROOT_SCAN as f64;
            let r = residual(w);
            if r == 0.0 {
                candidates.push(w);
            } else if prev_r != 0.0 && prev_r.signum() != r.signum() {
                let root = find_root(residual, Interval::new(prev_w, w)?, 1e-15)?;
                candidates.push(root);
            }
            prev_w = w;
            prev_r = r;
        }
    }
    if candidates.is_empty() {
        return Err(Error::Convergence {
            context: "pre-commitment first-order condition".into(),
            iterations: ROOT_SCAN,
        });
    }

    let mut best: Option<(f64, f64)> = None;
    for &w in &candidates {
        let kappa = segment(model, gamma, w);
        // compare on the log scale; sign of α fixes the direction
        let lse = log_sum_exp_slice(&precommit_log_terms(model, alpha, horizon, &kappa));
        let score = lse / alpha;
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((w, score));
        }
    }
    let (w, _) = best.expect("candidates is non-empty");
    let kappa_pre = segment(model, gamma, w);
    let rhs = foc_rhs(model, alpha, horizon, &kappa_pre);
    Ok(PrecommitResult {
        foc_residual: max_abs_diff(&kappa_pre, &rhs),
        upper_weight_pre: w,
        kappa_pre,
    })
}
