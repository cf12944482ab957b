//! Learning diagnostics and the Monte Carlo engine.
//!
//! Wealth is stepped exactly in log-space for piecewise-constant fractions,
//! `Δ log X = κᵀσ ΔY − ½ |σᵀκ|² Δt`, with `Y = W + ϑ_k t` in scenario `k`.
//! All scenarios share the same Brownian increments. Paths are grouped in
//! batches whose random streams depend only on `(seed, batch index)`, so
//! batch results can be produced in any order and folded deterministically.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::{MarketModel, Preferences};
use crate::numerics::{gauss_hermite_rule, gaussian_expectation, log_sum_exp_slice};
use crate::twopoint::TwoPointModel;

/// Which scenario generated the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrueModel {
    /// Upper scenario `ϑ̄`.
    Model1,
    /// Lower scenario `ϑ̲`.
    Model2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub t: f64,
    pub model_label: TrueModel,
    /// Posterior probabilities of the upper scenario.
    pub samples: Vec<f64>,
}

/// Draws the posterior probability of `ϑ̄` at time `t` under the true model:
/// `p̂_t = (1 + q e^{c} L_t(ϑ̲−ϑ̄, √t Z))⁻¹` with `q = (1−p)/p`, where `c = 0`
/// under Model 1 and `c = ‖ϑ̲−ϑ̄‖² t` under Model 2.
pub fn posterior_sample(model: &TwoPointModel, t: f64, true_model: TrueModel, n: usize, seed: u64) -> Result<PosteriorSample> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t must be positive"));
    }
    let p = model.p();
    let delta2: f64 = model
        .theta_lo()
        .iter()
        .zip(model.theta_hi())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let delta = delta2.sqrt();
    let shift = match true_model {
        TrueModel::Model1 => 0.0,
        TrueModel::Model2 => delta2 * t,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if p == 0.0 || p == 1.0 {
                return p;
            }
            // ‖ϑ̲−ϑ̄‖ √t Z has the law of (ϑ̲−ϑ̄)·√t Z for Z ~ N(0, I_d)
            let log_l = delta * t.sqrt() * z - 0.5 * delta2 * t;
            let x = ((1.0 - p) / p).ln() + shift + log_l;
            logistic(-x)
        })
        .collect();
    Ok(PosteriorSample {
        t,
        model_label: true_model,
        samples,
    })
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const LOG_VALUE_ORDERS: [usize; 4] = [256, 64, 32, 16];

/// Log-investor value of the learning strategy,
/// `v = ∫ F(T,z) ln F(T,z) φ_T(z) dz = Σ_k p_k E[ln F(T, Z + ϑ_k T)]`.
pub fn value_log_learning(model: &TwoPointModel, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be positive"));
    }
    let mk = model.market();
    let r = mk.reduced_dim();
    let m = mk.n_scenarios();
    let rows: Vec<Vec<f64>> = (0..m).map(|k| mk.reduced_scenario(k)).collect();
    let nn: Vec<f64> = rows.iter().map(|b| b.iter().map(|x| x * x).sum()).collect();
    let st = horizon.sqrt();
    let mut total = 0.0;
    for k in 0..m {
        let pk = mk.prior()[k];
        if pk == 0.0 {
            continue;
        }
        // ln F(T, z + ϑ_k T) = LSE_j(ln p_j + ϑ_j·z + T ϑ_j·ϑ_k − ½T‖ϑ_j‖²)
        let base: Vec<f64> = (0..m)
            .map(|j| {
                let cross: f64 = rows[j].iter().zip(&rows[k]).map(|(a, b)| a * b).sum();
                mk.prior()[j].ln() + horizon * (cross - 0.5 * nn[j])
            })
            .collect();
        let e = if r == 0 {
            log_sum_exp_slice(&base)
        } else {
            let rule = gauss_hermite_rule(LOG_VALUE_ORDERS[r.min(4) - 1])?;
            if r > 4 {
                return Err(Error::Unsupported(format!("reduced dimension {r}")));
            }
            let mut buf = vec![0.0; m];
            gaussian_expectation(
                |xi| {
                    for j in 0..m {
                        let dotp: f64 = rows[j].iter().zip(xi).map(|(a, b)| a * b).sum();
                        buf[j] = base[j] + st * dotp;
                    }
                    log_sum_exp_slice(&buf)
                },
                r,
                1.0,
                &rule,
            )?
        };
        total += pk * e;
    }
    Ok(total)
}

/// Pre-commitment log value `(p μ̄ + (1−p) μ̲)² T / (2σ²)`, single asset.
pub fn value_log_precommit(model: &TwoPointModel, horizon: f64) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::Unsupported("log pre-commitment value needs d = 1".into()));
    }
    let p = model.p();
    let mu = p * model.mu_hi()[0] + (1.0 - p) * model.mu_lo()[0];
    let s = model.market().sigma()[(0, 0)];
    Ok(mu * mu * horizon / (2.0 * s * s))
}

/// Savings-rate difference `(v − v^pre) / T`.
pub fn value_of_learning(model: &TwoPointModel, horizon: f64) -> Result<f64> {
    Ok((value_log_learning(model, horizon)? - value_log_precommit(model, horizon)?) / horizon)
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub batch_size: usize,
}

pub const DEFAULT_BATCH: usize = 1000;
pub const MIN_PATHS: usize = 100;

impl SimulationConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if n_paths < MIN_PATHS || n_steps == 0 {
            return Err(invalid(format!("need n_paths >= {MIN_PATHS} and n_steps >= 1")));
        }
        Ok(SimulationConfig {
            n_paths,
            n_steps,
            seed,
            batch_size: DEFAULT_BATCH,
        })
    }

    /// `n_steps = round(T / dt)`.
    pub fn with_dt(n_paths: usize, horizon: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) || !(horizon > 0.0) {
            return Err(invalid("need T > 0 and dt > 0"));
        }
        Self::new(n_paths, (horizon / dt).round().max(1.0) as usize, seed)
    }

    pub fn n_batches(&self) -> usize {
        self.n_paths.div_ceil(self.batch_size.max(1))
    }

    fn batch_len(&self, index: usize) -> usize {
        let b = self.batch_size.max(1);
        b.min(self.n_paths - index * b)
    }
}

/// A trading rule `(step, t, Y(t)) ↦ κ`.
pub trait Strategy: Sync {
    fn fractions(&self, step: usize, t: f64, y: &[f64], out: &mut [f64]);
}

/// Constant fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantStrategy(pub Vec<f64>);

impl Strategy for ConstantStrategy {
    fn fractions(&self, _: usize, _: f64, _: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Any closure with the strategy signature.
pub struct FnStrategy<F>(pub F);

impl<F> Strategy for FnStrategy<F>
where
    F: Fn(usize, f64, &[f64], &mut [f64]) + Sync,
{
    fn fractions(&self, step: usize, t: f64, y: &[f64], out: &mut [f64]) {
        (self.0)(step, t, y, out)
    }
}

/// Single-asset strategy tabulated on a per-step `y` grid and evaluated by
/// four-point Lagrange interpolation (clamped at the grid ends).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedStrategy {
    rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub lo: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

pub const TABLE_POINTS: usize = 129;
const TABLE_SPREAD: f64 = 8.0;

impl TableRow {
    /// The grid for time `t` covering every scenario's `Y(t)` to ±8 sd.
    pub fn grid(model: &MarketModel, t: f64) -> (f64, f64) {
        let th: Vec<f64> = model.scenarios().iter().map(|s| s[0]).collect();
        let lo = th.iter().copied().fold(f64::INFINITY, f64::min) * t - TABLE_SPREAD * t.sqrt();
        let hi = th.iter().copied().fold(f64::NEG_INFINITY, f64::max) * t + TABLE_SPREAD * t.sqrt();
        (lo, hi)
    }

    /// Tabulates `f(y)` on [`Self::grid`]; a single node at `t = 0`.
    pub fn build<F>(model: &MarketModel, t: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if t == 0.0 {
            return Ok(TableRow {
                lo: 0.0,
                spacing: 1.0,
                values: vec![f(0.0)?],
            });
        }
        let (lo, hi) = Self::grid(model, t);
        let spacing = (hi - lo) / (TABLE_POINTS - 1) as f64;
        let values = (0..TABLE_POINTS)
            .map(|i| f(lo + spacing * i as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(TableRow { lo, spacing, values })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let s = ((y - self.lo) / self.spacing).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).clamp(1, n.saturating_sub(3).max(1));
        if n < 4 {
            let j = (s.floor() as usize).min(n - 2);
            let u = s - j as f64;
            return self.values[j] * (1.0 - u) + self.values[j + 1] * u;
        }
        let u = s - i as f64;
        let v = &self.values[i - 1..i + 3];
        // nodes at -1, 0, 1, 2
        let l0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let l1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let l2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let l3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3]
    }
}

impl TabulatedStrategy {
    /// One row per simulation step.
    pub fn from_rows(rows: Vec<TableRow>) -> Self {
        TabulatedStrategy { rows }
    }

    /// Tabulates `f(t, y)` at `t = i·dt`, `i < n_steps`.
    pub fn build<F>(model: &MarketModel, n_steps: usize, dt: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        if model.dim() != 1 {
            return Err(Error::Unsupported("tabulated strategies are single-asset".into()));
        }
        let rows = (0..n_steps)
            .map(|i| {
                let t = i as f64 * dt;
                TableRow::build(model, t, |y| f(t, y))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TabulatedStrategy { rows })
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }
}

impl Strategy for TabulatedStrategy {
    fn fractions(&self, step: usize, _: f64, y: &[f64], out: &mut [f64]) {
        let row = &self.rows[step.min(self.rows.len() - 1)];
        out[0] = row.eval(y[0]);
    }
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|self − x| ≤ k·se` (with a rounding floor for `se = 0`).
    pub fn within(&self, x: f64, k: f64) -> bool {
        (self.mean - x).abs() <= k * self.se + 1e-12 * x.abs().max(1e-300)
    }
}

/// Running sums over simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub n: usize,
    /// `Σ u_k` per scenario.
    pub sum: Vec<f64>,
    /// `Σ u_j u_k`, row-major `m × m`.
    pub sum_outer: Vec<f64>,
}

impl BatchStats {
    pub fn new(m: usize) -> Self {
        BatchStats {
            n: 0,
            sum: vec![0.0; m],
            sum_outer: vec![0.0; m * m],
        }
    }

    pub fn merge(&mut self, other: &BatchStats) {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_outer.iter_mut().zip(&other.sum_outer) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub per_scenario: Vec<Estimate>,
    /// Prior mixture `Σ p_k E_k[u(X_T)]`.
    pub mixture: Estimate,
    /// KMM objective `(Σ p_k (α E_k[u])^𝐩)^{1/𝐩} / α`.
    pub kmm: Estimate,
    pub n_paths: usize,
}

/// Simulates batch `index` of `config`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_batch<S: Strategy + ?Sized>(
    model: &MarketModel,
    prefs: &Preferences,
    strategy: &S,
    x0: f64,
    horizon: f64,
    config: &SimulationConfig,
    index: usize,
) -> Result<BatchStats> {
    check_inputs(x0, horizon, config)?;
    let d = model.dim();
    let m = model.n_scenarios();
    let alpha = prefs.alpha();
    let dt = horizon / config.n_steps as f64;
    let sdt = dt.sqrt();
    let sigma = model.sigma();
    let drift: Vec<Vec<f64>> = model.scenarios().iter().map(|s| s.iter().map(|v| v * dt).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let mut stats = BatchStats::new(m);
    let mut dw = vec![0.0; d];
    let mut y = vec![vec![0.0; d]; m];
    let mut logx = vec![0.0; m];
    let mut kappa = vec![0.0; d];
    let mut sk = vec![0.0; d];
    let mut u = vec![0.0; m];

    for _ in 0..config.batch_len(index) {
        y.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x = 0.0));
        logx.iter_mut().for_each(|v| *v = x0.ln());
        for step in 0..config.n_steps {
            let t = step as f64 * dt;
            for w in dw.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = sdt * z;
            }
            for k in 0..m {
                strategy.fractions(step, t, &y[k], &mut kappa);
                // σᵀκ
                for j in 0..d {
                    sk[j] = (0..d).map(|i| sigma[(i, j)] * kappa[i]).sum();
                }
                let mut incr = 0.0;
                let mut var = 0.0;
                for j in 0..d {
                    let dy = dw[j] + drift[k][j];
                    incr += sk[j] * dy;
                    var += sk[j] * sk[j];
                    y[k][j] += dy;
                }
                logx[k] += incr - 0.5 * var * dt;
            }
        }
        for k in 0..m {
            u[k] = (alpha * logx[k]).exp() / alpha;
            if !u[k].is_finite() {
                return Err(Error::NonFinite("simulated utility"));
            }
            stats.sum[k] += u[k];
        }
        for j in 0..m {
            for k in 0..m {
                stats.sum_outer[j * m + k] += u[j] * u[k];
            }
        }
        stats.n += 1;
    }
    Ok(stats)
}

fn check_inputs(x0: f64, horizon: f64, config: &SimulationConfig) -> Result<()> {
    if !(x0 > 0.0) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("need x0 > 0 and a positive finite horizon"));
    }
    if config.n_paths < MIN_PATHS || config.n_steps == 0 || config.batch_size == 0 {
        return Err(invalid("invalid simulation configuration"));
    }
    Ok(())
}

/// Turns accumulated sums into estimates.
pub fn summarize(model: &MarketModel, prefs: &Preferences, stats: &BatchStats) -> Result<SimulationResult> {
    let m = model.n_scenarios();
    let n = stats.n as f64;
    if stats.n < 2 {
        return Err(invalid("need at least two paths"));
    }
    let mean: Vec<f64> = stats.sum.iter().map(|s| s / n).collect();
    // covariance of the sample means
    let cov = |j: usize, k: usize| {
        let c = (stats.sum_outer[j * m + k] - n * mean[j] * mean[k]) / (n - 1.0);
        c / n
    };
    let per_scenario = (0..m)
        .map(|k| Estimate {
            mean: mean[k],
            se: cov(k, k).max(0.0).sqrt(),
        })
        .collect();
    let prior = model.prior();
    let quad = |g: &[f64]| {
        let mut v = 0.0;
        for j in 0..m {
            for k in 0..m {
                v += g[j] * g[k] * cov(j, k);
            }
        }
        v.max(0.0).sqrt()
    };
    let mix_mean: f64 = prior.iter().zip(&mean).map(|(p, x)| p * x).sum();
    let mixture = Estimate {
        mean: mix_mean,
        se: quad(prior),
    };

    let alpha = prefs.alpha();
    let pe = prefs.p_exp();
    let kmm = if pe == 1.0 {
        mixture
    } else {
        // α E_k[u] = E_k[X^α] > 0
        let s: f64 = prior.iter().zip(&mean).map(|(p, x)| p * (alpha * x).powf(pe)).sum();
        let value = s.powf(1.0 / pe) / alpha;
        let grad: Vec<f64> = prior
            .iter()
            .zip(&mean)
            .map(|(p, x)| s.powf(1.0 / pe - 1.0) * p * (alpha * x).powf(pe - 1.0))
            .collect();
        Estimate {
            mean: value,
            se: quad(&grad),
        }
    };
    Ok(SimulationResult {
        per_scenario,
        mixture,
        kmm,
        n_paths: stats.n,
    })
}

/// Serial simulation; batches are folded in index order.
pub fn simulate_utility<S: Strategy + ?Sized>(
    model: &MarketModel,
    prefs: &Preferences,
    strategy: &S,
    x0: f64,
    horizon: f64,
    config: &SimulationConfig,
) -> Result<SimulationResult> {
    check_inputs(x0, horizon, config)?;
    let mut total = BatchStats::new(model.n_scenarios());
    for b in 0..config.n_batches() {
        total.merge(&simulate_batch(model, prefs, strategy, x0, horizon, config, b)?);
    }
    summarize(model, prefs, &total)
}
