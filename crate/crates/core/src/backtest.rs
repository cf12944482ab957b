//! Single-asset backtest pipeline: rolling volatility, reconstruction of the
//! observation process `Y` from prices, and strategy paths.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDate;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::ambiguity::{adjust_prior, AdjustedPrior};
use crate::bayes::optimal_fraction;
use crate::error::{invalid, Error, Result};
use crate::model::{Preferences, StrategyQuery};
use crate::twopoint::TwoPointModel;

/// Volatilities at or below this are treated as degenerate.
pub const MIN_VOL: f64 = 1e-6;
pub const MIN_WINDOW: usize = 10;

/// Dated prices, strictly increasing dates and positive prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(invalid("dates and prices differ in length"));
        }
        if let Some(i) = prices.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Validation(format!("price {} at row {i} is not positive", prices[i])));
        }
        if let Some(i) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "dates not strictly increasing at row {}: {} then {}",
                i + 1,
                dates[i],
                dates[i + 1]
            )));
        }
        Ok(PriceSeries { dates, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// `r_i = ln(S_i / S_{i−1})` for `i ≥ 1`; entry 0 is unused and zero.
    pub fn log_returns(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.len()];
        for i in 1..self.len() {
            r[i] = (self.prices[i] / self.prices[i - 1]).ln();
        }
        r
    }
}

/// A constant-drift comparator.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveDrift {
    pub label: String,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window: usize,
    pub trading_days_per_year: usize,
    pub mu_hi: f64,
    pub mu_lo: f64,
    pub p: f64,
    pub prefs: Preferences,
    pub horizon: f64,
    pub naive: Vec<NaiveDrift>,
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < MIN_WINDOW {
            return Err(invalid(format!("window must be at least {MIN_WINDOW}")));
        }
        if self.trading_days_per_year == 0 {
            return Err(invalid("trading_days_per_year must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        if !(self.mu_hi.abs() >= self.mu_lo.abs()) {
            return Err(invalid("mu_hi must have the larger magnitude"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.trading_days_per_year as f64
    }
}

/// Annualised rolling volatility: entry `j` belongs to date `window + j` and
/// uses the `window` log-returns ending at that date (sample SD, `n − 1`).
pub fn rolling_vol(series: &PriceSeries, config: &BacktestConfig) -> Result<Vec<f64>> {
    let w = config.window;
    if w < 2 || series.len() < w + 1 {
        return Err(invalid(format!(
            "window {w} needs at least {} prices, series has {}",
            w + 1,
            series.len()
        )));
    }
    let r = series.log_returns();
    let ann = (config.trading_days_per_year as f64).sqrt();
    let n = series.len();
    let mut out = Vec::with_capacity(n - w);
    for i in w..n {
        let win = &r[i + 1 - w..=i];
        let mean = win.iter().sum::<f64>() / w as f64;
        let ss: f64 = win.iter().map(|x| (x - mean) * (x - mean)).sum();
        out.push((ss / (w - 1) as f64).sqrt() * ann);
    }
    Ok(out)
}

/// Reconstructs `Y` on dates `window..`, with `Y = 0` at the first one and
/// `ΔY_i = r_i / σ_{i−1} + ½ σ_{i−1} Δt`. `vols[j]` is the volatility known at
/// date `window + j`.
pub fn y_increments(series: &PriceSeries, vols: &[f64], config: &BacktestConfig) -> Result<Vec<f64>> {
    let w = config.window;
    let n = series.len();
    if n <= w || vols.len() != n - w {
        return Err(invalid("need one volatility per date from the window onward"));
    }
    let r = series.log_returns();
    let dt = config.dt();
    let mut y = Vec::with_capacity(n - w);
    y.push(0.0);
    for i in w + 1..n {
        let s = vols[i - 1 - w];
        if !(s > MIN_VOL) {
            return Err(Error::DegenerateVolatility { index: i - 1, value: s });
        }
        let prev = *y.last().expect("non-empty");
        y.push(prev + r[i] / s + 0.5 * s * dt);
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub date: NaiveDate,
    pub sigma_hat: f64,
    pub y: f64,
    pub kappa_learning: f64,
    pub kappa_naive: Vec<f64>,
    pub kappa_ambiguity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub naive_labels: Vec<String>,
    pub has_ambiguity: bool,
    pub rows: Vec<PathRow>,
    /// Set when dates at or beyond the horizon were dropped.
    pub truncated: bool,
    pub adjusted: Option<AdjustedPrior>,
}

impl StrategyPath {
    /// Column names in output order.
    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = ["date", "sigma_hat", "Y", "kappa_learning"].iter().map(|s| String::from(*s)).collect();
        c.extend(self.naive_labels.iter().map(|l| format!("kappa_naive_{l}")));
        if self.has_ambiguity {
            c.push("kappa_ambiguity".into());
        }
        c
    }
}

/// Learning, naive and (when `λ ≠ α`) ambiguity-adjusted fractions per date.
pub fn strategy_path(series: &PriceSeries, config: &BacktestConfig) -> Result<StrategyPath> {
    config.validate()?;
    if series.len() < config.window + 2 {
        return Err(invalid("series must contain at least window + 2 prices"));
    }
    let vols = rolling_vol(series, config)?;
    let y = y_increments(series, &vols, config)?;
    let w = config.window;
    let prefs = config.prefs;
    let gamma = prefs.gamma();

    let base = TwoPointModel::scalar(config.mu_hi, config.mu_lo, checked(vols[0], w)?, config.p)?;
    let adjusted = if prefs.is_ambiguity_neutral() {
        None
    } else {
        Some(adjust_prior(&base, &prefs, config.horizon)?)
    };

    let mut rows = Vec::with_capacity(y.len());
    let mut truncated = false;
    for (j, (&s, &yj)) in vols.iter().zip(&y).enumerate() {
        let t = j as f64 * config.dt();
        if t >= config.horizon {
            truncated = true;
            break;
        }
        let s = checked(s, w + j)?;
        let model = TwoPointModel::scalar(config.mu_hi, config.mu_lo, s, config.p)?;
        let q = StrategyQuery::new(t, config.horizon, vec![yj])?;
        let kappa_learning = optimal_fraction(model.market(), &prefs, &q)?.kappa[0];
        let kappa_ambiguity = match &adjusted {
            Some(a) => {
                let m = model.with_p(a.p_mod)?;
                Some(optimal_fraction(m.market(), &prefs, &q)?.kappa[0])
            }
            None => None,
        };
        rows.push(PathRow {
            date: series.dates()[w + j],
            sigma_hat: s,
            y: yj,
            kappa_learning,
            kappa_naive: config.naive.iter().map(|n| gamma * n.mu / (s * s)).collect(),
            kappa_ambiguity,
        });
    }
    Ok(StrategyPath {
        naive_labels: config.naive.iter().map(|n| n.label.clone()).collect(),
        has_ambiguity: adjusted.is_some(),
        rows,
        truncated,
        adjusted,
    })
}

fn checked(s: f64, index: usize) -> Result<f64> {
    if s > MIN_VOL && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::DegenerateVolatility { index, value: s })
    }
}
