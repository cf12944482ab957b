//! Smooth ambiguity (KMM) for the two-point prior.
//!
//! By duality the KMM problem becomes a Bayesian one under an adjusted,
//! unnormalised prior `(q₁, q₂)` lying on the boundary of
//! `(q₁/p)^𝐪 p + (q₂/(1−p))^𝐪 (1−p) ≤ 1`. The boundary is parametrised by
//! `ỹ ∈ (0, 1)` through `q₁ = p^{1/𝐩} ỹ^{1/𝐪}`, `q₂ = (1−p)^{1/𝐩} (1−ỹ)^{1/𝐪}`,
//! and the dual objective `J(ỹ) = ∫ (q₁ L_T(ϑ̄,z) + q₂ L_T(ϑ̲,z))^γ φ_T(z) dz`
//! is maximised when `𝐩 > 1` and minimised otherwise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::bayes::{optimal_fraction, reduced_mixture};
use crate::error::{invalid, Error, Result};
use crate::model::{FractionResult, Preferences, StrategyQuery};
use crate::numerics::{minimize_scalar, ExpFamily, Integrator, Interval};
use crate::twopoint::TwoPointModel;

/// Interior clipping of the `ỹ` search interval.
pub const YTILDE_EPS: f64 = 1e-9;
const YTILDE_TOL: f64 = 1e-12;

/// Which dual problem applies, from the signs of `α`, `λ` and `𝐩 = λ/α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualCase {
    /// `0 < α < λ` or `λ < α < 0`: `𝐩 > 1`, supremum over `0 ≤ q₁ ≤ q₁^b`.
    SupPGt1,
    /// `0 < λ < α` or `α < λ < 0`: `0 < 𝐩 < 1`, infimum over `q₁ ≥ q₁^b`.
    InfP01,
    /// `α`, `λ` of opposite sign: `𝐩 < 0`, infimum over `0 ≤ q₁ ≤ q₁^b`.
    InfPNeg,
}

impl DualCase {
    /// `None` when `λ = α` (no adjustment).
    pub fn of(prefs: &Preferences) -> Option<DualCase> {
        if prefs.is_ambiguity_neutral() {
            return None;
        }
        let p = prefs.p_exp();
        Some(if p > 1.0 {
            DualCase::SupPGt1
        } else if p > 0.0 {
            DualCase::InfP01
        } else {
            DualCase::InfPNeg
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            DualCase::SupPGt1 => "SUP_P_GT1",
            DualCase::InfP01 => "INF_0P1",
            DualCase::InfPNeg => "INF_P_NEG",
        }
    }

    pub fn is_sup(&self) -> bool {
        matches!(self, DualCase::SupPGt1)
    }

    /// Feasible range of `q₁` relative to `q₁^b = p^{1/𝐩}`.
    pub fn feasible_set(&self) -> &'static str {
        match self {
            DualCase::SupPGt1 | DualCase::InfPNeg => "0 <= q1 <= p^(1/p_exp)",
            DualCase::InfP01 => "q1 >= p^(1/p_exp)",
        }
    }
}

/// Dual-optimal adjusted prior.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedPrior {
    pub q1: f64,
    pub q2: f64,
    pub p_mod: f64,
    pub ytilde: f64,
    /// Optimal dual objective `J*`.
    pub objective: f64,
    pub case: Option<DualCase>,
}

/// `h(q₁) = ((1 − q₁^𝐪 p^{1−𝐪}) / (1−p)^{1−𝐪})^{1/𝐪}`, the `q₂` on the
/// constraint boundary.
pub fn h_complement(q1: f64, p: f64, q_exp: f64) -> Result<f64> {
    if !(q1 >= 0.0) || !(p > 0.0 && p < 1.0) || !q_exp.is_finite() || q_exp == 0.0 {
        return Err(invalid("need q1 >= 0, 0 < p < 1 and finite non-zero q_exp"));
    }
    let radicand = (1.0 - q1.powf(q_exp) * p.powf(1.0 - q_exp)) / (1.0 - p).powf(1.0 - q_exp);
    // ulp-level negatives at the boundary are zero
    let radicand = if radicand < 0.0 && radicand > -1e-14 { 0.0 } else { radicand };
    if !(radicand >= 0.0) || !radicand.is_finite() {
        return Err(Error::Domain(format!("q1 = {q1} is infeasible (radicand {radicand})")));
    }
    Ok(radicand.powf(1.0 / q_exp))
}

/// `(q₁(ỹ), q₂(ỹ))` on the binding constraint.
pub fn dual_pair(ytilde: f64, p: f64, prefs: &Preferences) -> (f64, f64) {
    let (pe, qe) = (prefs.p_exp(), prefs.q_exp());
    (
        p.powf(1.0 / pe) * ytilde.powf(1.0 / qe),
        (1.0 - p).powf(1.0 / pe) * (1.0 - ytilde).powf(1.0 / qe),
    )
}

/// `log J(ỹ)`.
pub fn log_dual_objective(
    ytilde: f64,
    model: &TwoPointModel,
    gamma: f64,
    horizon: f64,
    prefs: &Preferences,
) -> Result<f64> {
    if !(ytilde > 0.0 && ytilde < 1.0) {
        return Err(invalid("ytilde must lie in (0, 1)"));
    }
    if !(gamma > 0.0) || !(horizon >= 0.0) {
        return Err(invalid("need gamma > 0 and T >= 0"));
    }
    let (q1, q2) = dual_pair(ytilde, model.p(), prefs);
    log_weighted_power(model, [q1, q2], gamma, horizon)
}

/// `log ∫ (q₁ L_T(ϑ̄) + q₂ L_T(ϑ̲))^γ φ_T`.
pub fn log_weighted_power(model: &TwoPointModel, q: [f64; 2], gamma: f64, horizon: f64) -> Result<f64> {
    let lw = [q[0].ln(), q[1].ln()];
    if lw.iter().any(|v| v.is_nan() || *v == f64::INFINITY) || lw.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::NonFinite("dual weights"));
    }
    let mk = model.market();
    if horizon == 0.0 || mk.reduced_dim() == 0 {
        return Ok(gamma * crate::numerics::log_sum_exp_slice(&lw));
    }
    let mix = reduced_mixture(mk, &lw, horizon)?;
    Integrator::default_ref().log_expectation(&mix, &ExpFamily::power(gamma))
}

/// `J(ỹ)` itself.
pub fn dual_objective_j(
    ytilde: f64,
    model: &TwoPointModel,
    gamma: f64,
    horizon: f64,
    prefs: &Preferences,
) -> Result<f64> {
    let v = log_dual_objective(ytilde, model, gamma, horizon, prefs)?.exp();
    if !v.is_finite() {
        return Err(Error::NonFinite("dual objective"));
    }
    Ok(v)
}

/// Solves the dual problem for horizon `T` at time 0.
pub fn adjust_prior(model: &TwoPointModel, prefs: &Preferences, horizon: f64) -> Result<AdjustedPrior> {
    let p = model.p();
    let gamma = prefs.gamma();
    let case = match DualCase::of(prefs) {
        None => {
            let objective = log_weighted_power(model, [p, 1.0 - p], gamma, horizon)?.exp();
            return Ok(AdjustedPrior {
                q1: p,
                q2: 1.0 - p,
                p_mod: p,
                ytilde: p,
                objective,
                case: None,
            });
        }
        Some(c) => c,
    };
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("the dual adjustment needs 0 < p < 1"));
    }
    let sign = if case.is_sup() { -1.0 } else { 1.0 };
    let mut failure = None;
    let objective = |y: f64| match log_dual_objective(y, model, gamma, horizon, prefs) {
        Ok(v) => sign * v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let domain = Interval::new(YTILDE_EPS, 1.0 - YTILDE_EPS)?;
    let (ytilde, best) = minimize_scalar(objective, domain, YTILDE_TOL).map_err(|e| match e {
        Error::Domain(msg) => Error::Convergence {
            context: format!("dual objective ({}): {msg}", case.id()),
            iterations: 0,
        },
        other => other,
    })?;
    if !best.is_finite() {
        return Err(failure.unwrap_or(Error::NonFinite("dual objective")));
    }
    let (q1, q2) = dual_pair(ytilde, p, prefs);
    Ok(AdjustedPrior {
        q1,
        q2,
        p_mod: q1 / (q1 + q2),
        ytilde,
        objective: (sign * best).exp(),
        case: Some(case),
    })
}

/// KMM value in utility units, `x₀^α J*^{1/γ} / α`; equals the Bayesian value
/// when `λ = α`.
pub fn kmm_value(model: &TwoPointModel, prefs: &Preferences, x0: f64, horizon: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(invalid("initial wealth must be positive"));
    }
    let adj = adjust_prior(model, prefs, horizon)?;
    let alpha = prefs.alpha();
    let v = (alpha * x0.ln() + adj.objective.ln() / prefs.gamma()).exp() / alpha;
    if !v.is_finite() {
        return Err(Error::NonFinite("kmm value"));
    }
    Ok(v)
}

/// Certainty equivalent of the KMM objective, `x₀ J*^{(1−α)/α}`.
pub fn kmm_certainty_equivalent(model: &TwoPointModel, prefs: &Preferences, x0: f64, horizon: f64) -> Result<f64> {
    let adj = adjust_prior(model, prefs, horizon)?;
    let a = prefs.alpha();
    Ok(x0 * (adj.objective.ln() * (1.0 - a) / a).exp())
}

/// Bayesian fraction under the prior `(p^mod, 1 − p^mod)` fixed at time 0 for
/// the query horizon.
pub fn ambiguous_fraction(
    model: &TwoPointModel,
    prefs: &Preferences,
    query: &StrategyQuery,
) -> Result<FractionResult> {
    let adj = adjust_prior(model, prefs, query.horizon())?;
    ambiguous_fraction_with(model, prefs, query, &adj)
}

/// As [`ambiguous_fraction`] with a precomputed adjustment.
pub fn ambiguous_fraction_with(
    model: &TwoPointModel,
    prefs: &Preferences,
    query: &StrategyQuery,
    adjusted: &AdjustedPrior,
) -> Result<FractionResult> {
    let m = model.with_p(adjusted.p_mod)?;
    optimal_fraction(m.market(), prefs, query)
}

/// Result of [`dual_norm_discrete`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualNorm {
    /// `(Σ p_i x_i^𝐩)^{1/𝐩}`.
    pub norm: f64,
    /// Optimal dual weights `q*_i = p_i x_i^{𝐩−1} / norm^{𝐩−1}`.
    pub q_star: Vec<f64>,
    /// `Σ q*_i x_i`.
    pub dual_value: f64,
}

/// Discrete power mean and its dual representation
/// `(Σ x_i^𝐩 p_i)^{1/𝐩} = sup / inf { Σ x_i q_i : Σ (q_i/p_i)^𝐪 p_i = 1 }`.
pub fn dual_norm_discrete(values: &[f64], probs: &[f64], p_exp: f64) -> Result<DualNorm> {
    if values.len() != probs.len() || values.is_empty() {
        return Err(invalid("values and probabilities must have equal, non-zero length"));
    }
    if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(invalid("probs must be a probability vector"));
    }
    if values.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(invalid("values must be finite and non-negative"));
    }
    if !p_exp.is_finite() || p_exp == 0.0 {
        return Err(invalid("p_exp must be finite and non-zero"));
    }
    if p_exp < 1.0 && values.iter().zip(probs).any(|(x, p)| *p > 0.0 && *x == 0.0) {
        return Err(Error::Domain("values must be positive when p_exp < 1".into()));
    }
    let norm = values
        .iter()
        .zip(probs)
        .map(|(x, p)| p * x.powf(p_exp))
        .sum::<f64>()
        .powf(1.0 / p_exp);
    let q_star: Vec<f64> = if norm == 0.0 || p_exp == 1.0 {
        probs.to_vec()
    } else {
        values
            .iter()
            .zip(probs)
            .map(|(x, p)| if *p == 0.0 { 0.0 } else { p * (x / norm).powf(p_exp - 1.0) })
            .collect()
    };
    let dual_value: f64 = q_star.iter().zip(values).map(|(q, x)| q * x).sum();
    let scale = norm.abs().max(f64::MIN_POSITIVE);
    if (dual_value - norm).abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::Validation(format!(
            "dual value {dual_value} differs from direct norm {norm}"
        )));
    }
    Ok(DualNorm {
        norm,
        q_star,
        dual_value,
    })
}

/// `Σ (q_i/p_i)^𝐪 p_i`, the dual constraint functional.
pub fn dual_constraint(q: &[f64], probs: &[f64], q_exp: f64) -> f64 {
    q.iter()
        .zip(probs)
        .filter(|(_, p)| **p > 0.0)
        .map(|(qi, p)| (qi / p).powf(q_exp) * p)
        .sum()
}

/// Convenience: the adjusted two-point prior as a probability vector.
pub fn adjusted_probabilities(adj: &AdjustedPrior) -> Vec<f64> {
    vec![adj.p_mod, 1.0 - adj.p_mod]
}
