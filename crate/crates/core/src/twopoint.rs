//! Two-scenario prior: the optimal fraction is a convex combination of the two
//! Merton fractions, with weight `α(t,T,Y) = 1 − (1−p) F̂(t,T,Y)` on the upper one.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::bayes::{log_likelihood, log_mixture_f, log_posterior, reduced_mixture};
use crate::error::{invalid, Error, Result};
use crate::model::{FractionResult, MarketModel, StrategyQuery};
use crate::numerics::{ExpFamily, Integrator, MAX_TENSOR_DIM};

/// Table 1 benchmark: upper and lower drift, volatility, prior, horizon.
pub const BENCH_MU_HI: f64 = 0.09;
pub const BENCH_MU_LO: f64 = 0.03;
pub const BENCH_SIGMA: f64 = 0.15;
pub const BENCH_P: f64 = 0.5;
pub const BENCH_HORIZON: f64 = 10.0;

/// Market with an upper scenario `ϑ̄` (probability `p`) and a lower scenario
/// `ϑ̲`, labelled so that `‖ϑ̄‖ ≥ ‖ϑ̲‖`. The endpoints `p ∈ {0, 1}` are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointModel {
    market: MarketModel,
    p: f64,
}

impl TwoPointModel {
    pub fn new(sigma: DMatrix<f64>, theta_hi: Vec<f64>, theta_lo: Vec<f64>, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p must lie in [0, 1]"));
        }
        let n_hi: f64 = theta_hi.iter().map(|v| v * v).sum();
        let n_lo: f64 = theta_lo.iter().map(|v| v * v).sum();
        if n_hi < n_lo {
            return Err(invalid("upper scenario must have the larger norm"));
        }
        let market = MarketModel::new_allowing_zero_prior(sigma, vec![theta_hi, theta_lo], vec![p, 1.0 - p])?;
        Ok(TwoPointModel { market, p })
    }

    /// Scenarios given as drift vectors.
    pub fn from_drifts(sigma: DMatrix<f64>, mu_hi: &[f64], mu_lo: &[f64], p: f64) -> Result<Self> {
        let tmp = MarketModel::from_drifts(sigma.clone(), vec![mu_hi.to_vec(), mu_lo.to_vec()], vec![0.5, 0.5])?;
        Self::new(sigma, tmp.scenario(0).to_vec(), tmp.scenario(1).to_vec(), p)
    }

    /// Single asset with drifts `μ̄`, `μ̲` and volatility `σ`.
    pub fn scalar(mu_hi: f64, mu_lo: f64, sigma: f64, p: f64) -> Result<Self> {
        Self::from_drifts(DMatrix::from_element(1, 1, sigma), &[mu_hi], &[mu_lo], p)
    }

    /// `μ̄ = 0.09`, `μ̲ = 0.03`, `σ = 0.15`, `p = ½`.
    pub fn benchmark() -> Self {
        Self::scalar(BENCH_MU_HI, BENCH_MU_LO, BENCH_SIGMA, BENCH_P).expect("benchmark parameters are valid")
    }

    pub fn market(&self) -> &MarketModel {
        &self.market
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.market.dim()
    }

    pub fn theta_hi(&self) -> &[f64] {
        self.market.scenario(0)
    }

    pub fn theta_lo(&self) -> &[f64] {
        self.market.scenario(1)
    }

    pub fn mu_hi(&self) -> Vec<f64> {
        self.market.drift(0)
    }

    pub fn mu_lo(&self) -> Vec<f64> {
        self.market.drift(1)
    }

    /// Same scenarios, prior `p` replaced.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p must lie in [0, 1]"));
        }
        Ok(TwoPointModel {
            market: self.market.with_prior(vec![p, 1.0 - p])?,
            p,
        })
    }

    /// Same drifts under a new volatility matrix.
    pub fn with_sigma(&self, sigma: DMatrix<f64>) -> Result<Self> {
        Self::from_drifts(sigma, &self.mu_hi(), &self.mu_lo(), self.p)
    }
}

/// `F̂(t,T,Y) = ∫ L_T(ϑ̲, z+Y) F(T,z+Y)^{γ−1} φ_{T−t} / ∫ F(T,z+Y)^γ φ_{T−t}`.
pub fn f_hat(model: &TwoPointModel, gamma: f64, query: &StrategyQuery) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma must be positive and finite"));
    }
    let mk = &model.market;
    if query.y().len() != mk.dim() {
        return Err(invalid("Y(t) must have one entry per asset"));
    }
    let (t, y) = (query.t(), query.y());
    // L_t(ϑ̲, y) / F(t, y) pulls out of both integrals.
    let log_ratio = log_likelihood(mk.scenario(1), y, t) - log_mixture_f(mk, t, y);
    let tau = query.remaining();
    if tau == 0.0 || mk.reduced_dim() == 0 {
        return Ok(log_ratio.exp());
    }
    if mk.reduced_dim() > MAX_TENSOR_DIM {
        return Err(Error::Unsupported("reduced dimension above 4".into()));
    }
    let lp = log_posterior(mk, t, y);
    let mix = reduced_mixture(mk, &lp, tau)?;
    // component 1 without its posterior weight
    let mut lower = ExpFamily::component(&mix, 1, gamma - 1.0);
    let nn: f64 = mk.reduced_scenario(1).iter().map(|b| b * b).sum();
    lower.offset = -0.5 * tau * nn;
    let mut out = [0.0; 2];
    Integrator::default_ref().log_expectations(&mix, &[ExpFamily::power(gamma), lower], &mut out)?;
    let v = (log_ratio + out[1] - out[0]).exp();
    if !v.is_finite() {
        return Err(Error::NonFinite("f_hat"));
    }
    Ok(v)
}

/// Weight `α(t,T,Y) = 1 − (1−p) F̂` on the upper Merton fraction.
pub fn upper_weight(model: &TwoPointModel, gamma: f64, query: &StrategyQuery) -> Result<f64> {
    let w = 1.0 - (1.0 - model.p) * f_hat(model, gamma, query)?;
    if !(-1e-12..=1.0 + 1e-12).contains(&w) {
        return Err(Error::Validation(alloc::format!("upper weight {w} outside [0, 1]")));
    }
    Ok(w.clamp(0.0, 1.0))
}

/// Weight `g = (1−p) F̂(0,T,0)` on the lower Merton fraction at time 0.
pub fn lower_weight_g(alpha: f64, p: f64, horizon: f64, theta_lo: &[f64], theta_hi: &[f64]) -> Result<f64> {
    if !(alpha < 1.0) || alpha == 0.0 || !alpha.is_finite() {
        return Err(invalid("alpha must satisfy alpha < 1, alpha != 0"));
    }
    if theta_lo.len() != theta_hi.len() {
        return Err(invalid("scenario dimensions differ"));
    }
    let d = theta_lo.len();
    let model = TwoPointModel::new(DMatrix::identity(d, d), theta_hi.to_vec(), theta_lo.to_vec(), p)?;
    let q = StrategyQuery::initial(horizon, d)?;
    Ok(1.0 - upper_weight(&model, 1.0 / (1.0 - alpha), &q)?)
}

/// `κ = α κ^Mer(γ,ϑ̄) + (1−α) κ^Mer(γ,ϑ̲)`; weights are `(α, 1−α)`.
pub fn fraction_convex(model: &TwoPointModel, gamma: f64, query: &StrategyQuery) -> Result<FractionResult> {
    let w = upper_weight(model, gamma, query)?;
    let hi = model.market.merton_fraction(gamma, 0);
    let lo = model.market.merton_fraction(gamma, 1);
    Ok(FractionResult {
        kappa: hi.iter().zip(&lo).map(|(a, b)| w * a + (1.0 - w) * b).collect(),
        scenario_weights: vec![w, 1.0 - w],
        at_horizon: query.remaining() == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::fraction_for_gamma;

    #[test]
    fn label_order_and_probability_range() {
        let s = DMatrix::from_element(1, 1, 0.15);
        assert!(TwoPointModel::new(s.clone(), vec![0.2], vec![0.6], 0.5).is_err());
        assert!(TwoPointModel::new(s.clone(), vec![0.6], vec![0.2], 1.5).is_err());
        assert!(TwoPointModel::new(s.clone(), vec![0.6], vec![-0.6], 0.5).is_ok());
        assert!(TwoPointModel::new(s, vec![0.6], vec![0.2], 1.0).is_ok());
        let b = TwoPointModel::benchmark();
        assert!((b.theta_hi()[0] - 0.6).abs() < 1e-15);
        assert!((b.theta_lo()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn log_case_weight_is_prior() {
        let b = TwoPointModel::benchmark().with_p(0.3).unwrap();
        let q = StrategyQuery::initial(10.0, 1).unwrap();
        assert!((f_hat(&b, 1.0, &q).unwrap() - 1.0).abs() < 1e-12);
        assert!((upper_weight(&b, 1.0, &q).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn degenerate_upper_prior() {
        let b = TwoPointModel::benchmark().with_p(1.0).unwrap();
        let q = StrategyQuery::new(2.0, 10.0, vec![0.3]).unwrap();
        assert_eq!(upper_weight(&b, 0.5, &q).unwrap(), 1.0);
        let f = fraction_convex(&b, 0.5, &q).unwrap();
        assert!((f.kappa[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn benchmark_weight_range_and_equivalence() {
        let b = TwoPointModel::benchmark();
        let q = StrategyQuery::initial(10.0, 1).unwrap();
        let fh = f_hat(&b, 0.5, &q).unwrap();
        assert!(fh > 0.0 && fh < 2.0);
        let c = fraction_convex(&b, 0.5, &q).unwrap();
        let g = fraction_for_gamma(b.market(), 0.5, &q).unwrap();
        assert!((c.kappa[0] - g.kappa[0]).abs() < 1e-10);
    }

    #[test]
    fn g_sign_follows_risk_aversion() {
        let g_neg = lower_weight_g(-1.0, 0.5, 10.0, &[0.2], &[0.6]).unwrap();
        let g_pos = lower_weight_g(0.5, 0.5, 10.0, &[0.2], &[0.6]).unwrap();
        assert!(g_neg > 0.5 && g_pos < 0.5, "{g_neg} {g_pos}");
    }
}
