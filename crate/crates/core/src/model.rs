//! Market, preference and query types shared by every solver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Largest accepted condition number of the volatility matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Eigenvalues of `AAᵀ` below this fraction of the largest are dropped.
pub const RANK_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-12;

/// Volatility matrix `σ`, drift scenarios `ϑ_k` (market prices of risk) and
/// their prior probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    sigma: DMatrix<f64>,
    sigma_inv_t: DMatrix<f64>,
    scenarios: Vec<Vec<f64>>,
    prior: Vec<f64>,
    // m × r factor with B Bᵀ = A Aᵀ, rows of A being the ϑ_k
    projection: DMatrix<f64>,
}

impl MarketModel {
    pub fn new(sigma: DMatrix<f64>, scenarios: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        validate_prior(&prior, false)?;
        Self::build(sigma, scenarios, prior)
    }

    /// Scenarios given as drifts `μ_k`; stores `ϑ_k = σ⁻¹ μ_k`.
    pub fn from_drifts(sigma: DMatrix<f64>, drifts: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        let sigma_inv = checked_inverse(&sigma)?;
        let scenarios = drifts
            .iter()
            .map(|mu| {
                if mu.len() != sigma.nrows() {
                    return Err(invalid("drift length must equal the asset count"));
                }
                Ok((&sigma_inv * DVector::from_column_slice(mu)).iter().copied().collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(sigma, scenarios, prior)
    }

    /// Single-asset model with scalar volatility and drifts.
    pub fn scalar(sigma: f64, drifts: &[f64], prior: Vec<f64>) -> Result<Self> {
        Self::from_drifts(
            DMatrix::from_element(1, 1, sigma),
            drifts.iter().map(|&m| vec![m]).collect(),
            prior,
        )
    }

    /// Checks supplied drifts against `σ ϑ_k`.
    pub fn check_drifts(&self, drifts: &[Vec<f64>]) -> Result<()> {
        if drifts.len() != self.scenarios.len() {
            return Err(invalid("one drift per scenario is required"));
        }
        for (k, mu) in drifts.iter().enumerate() {
            let implied = self.drift(k);
            if mu.len() != implied.len()
                || mu.iter().zip(&implied).any(|(a, b)| (a - b).abs() > 1e-12)
            {
                return Err(Error::Validation(format!("drift {k} differs from sigma * theta")));
            }
        }
        Ok(())
    }

    /// Same scenarios under another prior; zero probabilities are allowed.
    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self> {
        validate_prior(&prior, true)?;
        if prior.len() != self.scenarios.len() {
            return Err(invalid("prior length must equal the scenario count"));
        }
        Ok(MarketModel {
            prior,
            ..self.clone()
        })
    }

    /// Same scenarios and prior under another volatility matrix.
    pub fn with_sigma(&self, sigma: DMatrix<f64>) -> Result<Self> {
        Self::build(sigma, self.scenarios.clone(), self.prior.clone())
    }

    pub(crate) fn new_allowing_zero_prior(
        sigma: DMatrix<f64>,
        scenarios: Vec<Vec<f64>>,
        prior: Vec<f64>,
    ) -> Result<Self> {
        validate_prior(&prior, true)?;
        Self::build(sigma, scenarios, prior)
    }

    fn build(sigma: DMatrix<f64>, scenarios: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(invalid("sigma must be a non-empty square matrix"));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sigma must be finite"));
        }
        if scenarios.is_empty() || scenarios.len() != prior.len() {
            return Err(invalid("need one prior probability per scenario, m >= 1"));
        }
        if scenarios.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite())) {
            return Err(invalid("each scenario must be a finite d-vector"));
        }
        let sigma_inv = checked_inverse(&sigma)?;
        let sigma_inv_t = sigma_inv.transpose();
        let projection = reduce(&scenarios);
        Ok(MarketModel {
            sigma,
            sigma_inv_t,
            scenarios,
            prior,
            projection,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `(σᵀ)⁻¹`.
    pub fn sigma_inv_t(&self) -> &DMatrix<f64> {
        &self.sigma_inv_t
    }

    pub fn scenarios(&self) -> &[Vec<f64>] {
        &self.scenarios
    }

    pub fn scenario(&self, k: usize) -> &[f64] {
        &self.scenarios[k]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// `μ_k = σ ϑ_k`.
    pub fn drift(&self, k: usize) -> Vec<f64> {
        (&self.sigma * DVector::from_column_slice(&self.scenarios[k]))
            .iter()
            .copied()
            .collect()
    }

    /// Rank of the scenario matrix, i.e. the quadrature dimension.
    pub fn reduced_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Row `k` of the reduced factor `B`; `B_j·B_k = ϑ_j·ϑ_k`.
    pub fn reduced_scenario(&self, k: usize) -> Vec<f64> {
        self.projection.row(k).iter().copied().collect()
    }

    pub(crate) fn reduced_row(&self, k: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.projection[(k, j)];
        }
    }

    /// `(σᵀ)⁻¹ v`.
    pub fn apply_sigma_inv_t(&self, v: &[f64]) -> Vec<f64> {
        (&self.sigma_inv_t * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    /// Merton fraction `γ (σᵀ)⁻¹ ϑ_k`.
    pub fn merton_fraction(&self, gamma: f64, k: usize) -> Vec<f64> {
        let mut v = self.apply_sigma_inv_t(&self.scenarios[k]);
        v.iter_mut().for_each(|x| *x *= gamma);
        v
    }

    /// `γ (σᵀ)⁻¹ Σ_k w_k ϑ_k`.
    pub fn weighted_fraction(&self, gamma: f64, weights: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut theta = vec![0.0; d];
        for (w, s) in weights.iter().zip(&self.scenarios) {
            for i in 0..d {
                theta[i] += w * s[i];
            }
        }
        self.merton_fraction_of(gamma, &theta)
    }

    fn merton_fraction_of(&self, gamma: f64, theta: &[f64]) -> Vec<f64> {
        let mut v = self.apply_sigma_inv_t(theta);
        v.iter_mut().for_each(|x| *x *= gamma);
        v
    }

    /// Componentwise `[γ min_k, γ max_k]` of the Merton fractions.
    pub fn fraction_bounds(&self, gamma: f64) -> Vec<(f64, f64)> {
        let d = self.dim();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for k in 0..self.n_scenarios() {
            let kappa = self.merton_fraction(gamma, k);
            for i in 0..d {
                bounds[i].0 = bounds[i].0.min(kappa[i]);
                bounds[i].1 = bounds[i].1.max(kappa[i]);
            }
        }
        bounds
    }
}

fn validate_prior(prior: &[f64], allow_zero: bool) -> Result<()> {
    if prior.is_empty() {
        return Err(invalid("prior must be non-empty"));
    }
    for (k, &p) in prior.iter().enumerate() {
        let ok = if allow_zero { p >= 0.0 } else { p > 0.0 };
        if !ok || !p.is_finite() {
            return Err(invalid(format!("prior probability {k} = {p} is not admissible")));
        }
    }
    let s: f64 = prior.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(invalid(format!("prior sums to {s}, not 1")));
    }
    Ok(())
}

fn checked_inverse(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() == 0 || sigma.nrows() != sigma.ncols() {
        return Err(invalid("sigma must be a non-empty square matrix"));
    }
    let sv = sigma.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::LinearAlgebra(format!(
            "sigma is singular or ill-conditioned (condition number {})",
            max / min
        )));
    }
    sigma
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("sigma is not invertible".into()))
}

/// Factor `A Aᵀ = B Bᵀ` keeping the numerically non-zero spectrum.
fn reduce(scenarios: &[Vec<f64>]) -> DMatrix<f64> {
    let m = scenarios.len();
    let gram = DMatrix::from_fn(m, m, |i, j| {
        scenarios[i]
            .iter()
            .zip(&scenarios[j])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    });
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = if max > 0.0 {
        let mut idx: Vec<usize> = (0..m)
            .filter(|&i| eig.eigenvalues[i] > RANK_TOL * max)
            .collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        idx
    } else {
        Vec::new()
    };
    DMatrix::from_fn(m, keep.len(), |i, j| {
        eig.eigenvectors[(i, keep[j])] * eig.eigenvalues[keep[j]].sqrt()
    })
}

/// Power-utility exponents: risk `α` and ambiguity `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    alpha: f64,
    lambda: f64,
}

impl Preferences {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("lambda", lambda)] {
            if !v.is_finite() || v >= 1.0 || v == 0.0 {
                return Err(invalid(format!("{name} = {v} must satisfy {name} < 1, {name} != 0")));
            }
        }
        Ok(Preferences { alpha, lambda })
    }

    /// Ambiguity-neutral preferences, `λ = α`.
    pub fn bayesian(alpha: f64) -> Result<Self> {
        Self::new(alpha, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `γ = 1 / (1 − α)`.
    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.alpha)
    }

    /// Relative risk aversion `1 − α`.
    pub fn risk_aversion(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn is_ambiguity_neutral(&self) -> bool {
        self.lambda == self.alpha
    }

    /// `𝐩 = λ / α`.
    pub fn p_exp(&self) -> f64 {
        self.lambda / self.alpha
    }

    /// Conjugate exponent `𝐪 = 𝐩 / (𝐩 − 1)`; infinite when `λ = α`.
    pub fn q_exp(&self) -> f64 {
        let p = self.p_exp();
        if p == 1.0 {
            f64::INFINITY
        } else {
            p / (p - 1.0)
        }
    }
}

/// Evaluation point `(t, T, Y(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyQuery {
    t: f64,
    horizon: f64,
    y: Vec<f64>,
}

impl StrategyQuery {
    /// Requires `0 ≤ t ≤ T`, `T > 0`; `t = T` yields the limiting fraction.
    pub fn new(t: f64, horizon: f64, y: Vec<f64>) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("t = {t} must be finite and non-negative")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) || horizon < t {
            return Err(invalid(format!("horizon {horizon} must be finite and at least t = {t}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observed Y(t) must be finite"));
        }
        Ok(StrategyQuery { t, horizon, y })
    }

    /// `t = 0`, `Y(0) = 0`.
    pub fn initial(horizon: f64, dim: usize) -> Result<Self> {
        Self::new(0.0, horizon, vec![0.0; dim])
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `T − t`.
    pub fn remaining(&self) -> f64 {
        self.horizon - self.t
    }
}

/// Optimal fractions together with the scenario weights `f_k` such that
/// `κ = γ (σᵀ)⁻¹ Σ_k f_k ϑ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionResult {
    pub kappa: Vec<f64>,
    pub scenario_weights: Vec<f64>,
    /// Set when `t = T` and the continuous-time limit was returned.
    pub at_horizon: bool,
}
