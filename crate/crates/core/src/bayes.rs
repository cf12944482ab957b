//! Bayesian adaptive portfolio problem for a discrete prior on the market
//! price of risk: likelihoods, posterior filter, value and optimal fractions.
//!
//! The likelihood factorises, `L_T(ϑ, y + z) = L_t(ϑ, y) L_{T−t}(ϑ, z)`, so the
//! fraction at `(t, Y(t))` equals the time-0 fraction for horizon `T − t`
//! under the posterior. All Gaussian integrals are taken over the reduced
//! variable `ξ ~ N(0, I_r)` with `z·ϑ_k = √τ B_k·ξ`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::{FractionResult, MarketModel, Preferences, StrategyQuery};
use crate::numerics::{log_sum_exp_slice, ExpFamily, Integrator, LogMixture, LogSumExp};

/// `log L_t(ϑ, z) = z·ϑ − ½‖ϑ‖² t`, zero at `t = 0`.
pub fn log_likelihood(theta: &[f64], z: &[f64], t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let zt: f64 = theta.iter().zip(z).map(|(a, b)| a * b).sum();
    let nn: f64 = theta.iter().map(|a| a * a).sum();
    zt - 0.5 * nn * t
}

/// `log F(t, z) = log Σ_k p_k L_t(ϑ_k, z)`.
pub fn log_mixture_f(model: &MarketModel, t: f64, z: &[f64]) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mut acc = LogSumExp::new();
    for (p, theta) in model.prior().iter().zip(model.scenarios()) {
        acc.push(p.ln() + log_likelihood(theta, z, t));
    }
    acc.value()
}

/// Log posterior probabilities `log(p_k L_t(ϑ_k, y) / F(t, y))`.
pub fn log_posterior(model: &MarketModel, t: f64, y: &[f64]) -> Vec<f64> {
    let mut lp: Vec<f64> = model
        .prior()
        .iter()
        .zip(model.scenarios())
        .map(|(p, theta)| p.ln() + log_likelihood(theta, y, t))
        .collect();
    let norm = log_sum_exp_slice(&lp);
    lp.iter_mut().for_each(|v| *v -= norm);
    lp
}

/// Posterior scenario probabilities given `Y(t) = y`; the prior at `t = 0`.
pub fn posterior(model: &MarketModel, t: f64, y: &[f64]) -> Vec<f64> {
    if t == 0.0 {
        return model.prior().to_vec();
    }
    log_posterior(model, t, y).iter().map(|v| v.exp()).collect()
}

/// Merton fraction `γ (σᵀ)⁻¹ ϑ`.
pub fn merton_fraction(gamma: f64, sigma: &DMatrix<f64>, theta: &[f64]) -> Result<Vec<f64>> {
    let d = sigma.nrows();
    if sigma.ncols() != d || theta.len() != d {
        return Err(invalid("sigma must be square and match theta"));
    }
    let lu = sigma.transpose().lu();
    let x = lu
        .solve(&DVector::from_column_slice(theta))
        .ok_or_else(|| Error::LinearAlgebra("sigma is singular".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearAlgebra("sigma is singular".into()));
    }
    Ok(x.iter().map(|v| gamma * v).collect())
}

/// The reduced mixture for the remaining horizon `tau` given log weights.
pub(crate) fn reduced_mixture(model: &MarketModel, log_weights: &[f64], tau: f64) -> Result<LogMixture> {
    let r = model.reduced_dim();
    let st = tau.sqrt();
    let m = model.n_scenarios();
    let mut coefs = Vec::with_capacity(m);
    let mut slopes = vec![0.0; m * r];
    for k in 0..m {
        let row = &mut slopes[k * r..(k + 1) * r];
        model.reduced_row(k, row);
        let nn: f64 = row.iter().map(|b| b * b).sum();
        coefs.push(log_weights[k] - 0.5 * tau * nn);
        row.iter_mut().for_each(|b| *b *= st);
    }
    LogMixture::new(r, coefs, slopes)
}

/// `log ∫ F(T, z)^γ φ_T(z) dz`.
pub fn log_expected_power(model: &MarketModel, gamma: f64, horizon: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(horizon >= 0.0) {
        return Err(invalid("gamma must be positive and horizon non-negative"));
    }
    if horizon == 0.0 || model.reduced_dim() == 0 {
        return Ok(0.0);
    }
    let lw: Vec<f64> = model.prior().iter().map(|p| p.ln()).collect();
    let mix = reduced_mixture(model, &lw, horizon)?;
    Integrator::default_ref().log_expectation(&mix, &ExpFamily::power(gamma))
}

/// Value `V(x₀) = (x₀^α/α) (∫ F(T,z)^γ φ_T(z) dz)^{1/γ}`.
pub fn value(model: &MarketModel, prefs: &Preferences, x0: f64, horizon: f64) -> Result<f64> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(invalid("initial wealth must be positive"));
    }
    let gamma = prefs.gamma();
    let le = log_expected_power(model, gamma, horizon)?;
    let alpha = prefs.alpha();
    let v = (alpha * x0.ln() + le / gamma).exp() / alpha;
    if !v.is_finite() {
        return Err(Error::NonFinite("value"));
    }
    Ok(v)
}

/// Optimal fractions for `α ≠ 0` at the query point.
pub fn optimal_fraction(
    model: &MarketModel,
    prefs: &Preferences,
    query: &StrategyQuery,
) -> Result<FractionResult> {
    fraction_for_gamma(model, prefs.gamma(), query)
}

/// [`optimal_fraction`] parametrised directly by `γ > 0`.
pub fn fraction_for_gamma(
    model: &MarketModel,
    gamma: f64,
    query: &StrategyQuery,
) -> Result<FractionResult> {
    let weights = scenario_weights(model, gamma, query)?;
    let at_horizon = query.remaining() == 0.0;
    Ok(FractionResult {
        kappa: model.weighted_fraction(gamma, &weights),
        scenario_weights: weights,
        at_horizon,
    })
}

/// Scenario weights `f_k` at the query point.
pub fn scenario_weights(model: &MarketModel, gamma: f64, query: &StrategyQuery) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma must be positive and finite"));
    }
    if query.y().len() != model.dim() {
        return Err(invalid("Y(t) must have one entry per asset"));
    }
    let lp = log_posterior(model, query.t(), query.y());
    let tau = query.remaining();
    let m = model.n_scenarios();
    if tau == 0.0 || model.reduced_dim() == 0 || m == 1 {
        return Ok(lp.iter().map(|v| v.exp()).collect());
    }
    let mix = reduced_mixture(model, &lp, tau)?;
    let mut fams = Vec::with_capacity(m + 1);
    fams.push(ExpFamily::power(gamma));
    for k in 0..m {
        fams.push(ExpFamily::component(&mix, k, gamma - 1.0));
    }
    let mut out = vec![0.0; m + 1];
    Integrator::default_ref().log_expectations(&mix, &fams, &mut out)?;
    let norm = log_sum_exp_slice(&out[1..]);
    if !norm.is_finite() {
        return Err(Error::NonFinite("scenario weight normaliser"));
    }
    Ok(out[1..].iter().map(|v| (v - norm).exp()).collect())
}

/// Log-utility fraction `(σᵀ)⁻¹ E[Θ | Y(t)]`, independent of the horizon.
pub fn log_optimal_fraction(model: &MarketModel, query: &StrategyQuery) -> Result<Vec<f64>> {
    if query.y().len() != model.dim() {
        return Err(invalid("Y(t) must have one entry per asset"));
    }
    let post = posterior(model, query.t(), query.y());
    Ok(model.weighted_fraction(1.0, &post))
}
