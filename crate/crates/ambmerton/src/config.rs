//! Run configuration: Table 1 defaults, named presets, JSON files and dotted
//! `--key value` overrides, layered in that order.

use std::path::PathBuf;

use ambmerton_core::twopoint::{BENCH_HORIZON, BENCH_MU_HI, BENCH_MU_LO, BENCH_P, BENCH_SIGMA};
use ambmerton_core::{MarketModel, Preferences, StrategyQuery, TwoPointModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// The three investors of the benchmark: less risk averse than log (`1/γ = ½`),
/// log, and more risk averse (`1/γ = 2`). `α = 0` stands for log utility.
pub const DEFAULT_PROFILES: [f64; 3] = [0.5, 0.0, -1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub market: MarketConfig,
    pub prefs: PrefsConfig,
    pub query: QueryConfig,
    pub x0: f64,
    pub sweep: SweepConfig,
    pub simulation: SimulationSection,
    pub backtest: BacktestSection,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    /// Volatility matrix, row by row.
    pub sigma: Vec<Vec<f64>>,
    pub mu_hi: Vec<f64>,
    pub mu_lo: Vec<f64>,
    /// Prior probability of `mu_hi`.
    pub p: f64,
    /// Replaces the two-point prior by an arbitrary finite one.
    pub scenarios: Option<ScenarioSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub drifts: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefsConfig {
    pub alpha: f64,
    /// Ambiguity exponent; absent means `λ = α`.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueryConfig {
    pub t: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `Y(t)`; zeros when absent.
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    T,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "mu_hi")]
    MuHi,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "y")]
    Y,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::T => "T",
            Axis::P => "p",
            Axis::Alpha => "alpha",
            Axis::Lambda => "lambda",
            Axis::MuHi => "mu_hi",
            Axis::Sigma => "sigma",
            Axis::Y => "y",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: Option<Axis>,
    pub grid: Vec<f64>,
    /// Risk exponents `α`, one output row each per grid point.
    pub profiles: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Learning,
    Precommit,
    Ambiguity,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub strategy: StrategyKind,
    /// Fractions for the `constant` strategy.
    pub kappa: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaiveSpec {
    pub label: String,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    pub prices: Option<PathBuf>,
    pub window: usize,
    pub trading_days_per_year: usize,
    pub naive: Vec<NaiveSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            market: MarketConfig::default(),
            prefs: PrefsConfig::default(),
            query: QueryConfig::default(),
            x0: 1.0,
            sweep: SweepConfig::default(),
            simulation: SimulationSection::default(),
            backtest: BacktestSection::default(),
            output: None,
        }
    }
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            sigma: vec![vec![BENCH_SIGMA]],
            mu_hi: vec![BENCH_MU_HI],
            mu_lo: vec![BENCH_MU_LO],
            p: BENCH_P,
            scenarios: None,
        }
    }
}

impl Default for PrefsConfig {
    fn default() -> Self {
        PrefsConfig { alpha: -1.0, lambda: None }
    }
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            t: 0.0,
            horizon: BENCH_HORIZON,
            y: None,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: None,
            grid: Vec::new(),
            profiles: DEFAULT_PROFILES.to_vec(),
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            n_paths: 100_000,
            dt: 0.01,
            seed: 42,
            batch_size: 1000,
            strategy: StrategyKind::Learning,
            kappa: None,
        }
    }
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection {
            prices: None,
            window: 250,
            trading_days_per_year: 252,
            naive: vec![
                NaiveSpec {
                    label: "mu_hi".into(),
                    mu: BENCH_MU_HI,
                },
                NaiveSpec {
                    label: "mu_lo".into(),
                    mu: BENCH_MU_LO,
                },
            ],
        }
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub const PRESETS: [&str; 4] = ["fig1", "fig2", "fig7", "fig8"];

/// Figure sweeps on top of the benchmark.
pub fn preset(name: &str) -> CliResult<RunConfig> {
    let mut c = RunConfig::default();
    match name {
        // lower-fraction weight against the horizon
        "fig1" => {
            c.sweep.axis = Some(Axis::T);
            c.sweep.grid = grid(1.0, 50.0, 50);
        }
        // difference to the log investor against the prior
        "fig2" => {
            c.sweep.axis = Some(Axis::P);
            c.sweep.grid = grid(0.05, 0.95, 19);
        }
        // value of learning against the horizon, log investor
        "fig7" => {
            c.sweep.axis = Some(Axis::T);
            c.sweep.grid = grid(1.0, 50.0, 50);
            c.sweep.profiles = vec![0.0];
        }
        // modified prior against ambiguity aversion, 1 − α = 4
        "fig8" => {
            c.prefs.alpha = -3.0;
            c.sweep.axis = Some(Axis::Lambda);
            c.sweep.grid = grid(-0.5, -10.0, 20);
        }
        _ => {
            return Err(CliError::config(format!(
                "unknown preset `{name}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(c)
}

/// Deep merge: objects recurse, everything else is replaced.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Sets the dotted `path` to `raw`, read as JSON when possible and as a
/// string otherwise. Every key must name an existing field.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> CliResult<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(format!("malformed override `--{path}`")));
    }
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("`{}` is not a section", keys[..i].join("."))))?;
        let fresh = obj.is_empty();
        if !fresh && !obj.contains_key(*key) {
            return Err(CliError::config(format!("unknown config key `{path}`")));
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}

/// Splits `--a.b value` and `--a.b=value` pairs (dotted keys, plus the
/// top-level `x0`) out of the argument list.
pub fn split_overrides(args: Vec<String>) -> CliResult<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let key = a.strip_prefix("--").filter(|k| {
            let name = k.split('=').next().unwrap_or_default();
            name.contains('.') || name == "x0"
        });
        match key {
            Some(k) => match k.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().ok_or_else(|| CliError::config(format!("override `{a}` needs a value")))?;
                    overrides.push((k.to_string(), v));
                }
            },
            None => rest.push(a),
        }
    }
    Ok((rest, overrides))
}

/// Defaults (or preset), then the file, then the overrides.
pub fn resolve(preset_name: Option<&str>, file: Option<Value>, overrides: &[(String, String)]) -> CliResult<RunConfig> {
    let base = match preset_name {
        Some(n) => preset(n)?,
        None => RunConfig::default(),
    };
    let mut v = serde_json::to_value(base).expect("config serializes");
    if let Some(f) = file {
        if !f.is_object() {
            return Err(CliError::config("config file must hold a JSON object"));
        }
        merge(&mut v, f);
    }
    for (k, raw) in overrides {
        apply_override(&mut v, k, raw)?;
    }
    let cfg: RunConfig = serde_json::from_value(v).map_err(CliError::config)?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

impl MarketConfig {
    pub fn sigma_matrix(&self) -> CliResult<DMatrix<f64>> {
        let d = self.sigma.len();
        if d == 0 || self.sigma.iter().any(|r| r.len() != d) {
            return Err(CliError::config("market.sigma must be a non-empty square matrix"));
        }
        Ok(DMatrix::from_fn(d, d, |i, j| self.sigma[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// The two-point model; fails when a general prior is configured.
    pub fn two_point(&self) -> CliResult<TwoPointModel> {
        if self.scenarios.is_some() {
            return Err(CliError::config("this command needs the two-point prior (remove market.scenarios)"));
        }
        Ok(TwoPointModel::from_drifts(self.sigma_matrix()?, &self.mu_hi, &self.mu_lo, self.p)?)
    }

    pub fn model(&self) -> CliResult<MarketModel> {
        match &self.scenarios {
            Some(s) => Ok(MarketModel::from_drifts(self.sigma_matrix()?, s.drifts.clone(), s.prior.clone())?),
            None => Ok(self.two_point()?.market().clone()),
        }
    }
}

impl PrefsConfig {
    /// `None` for the log investor (`α = 0`).
    pub fn preferences(&self) -> CliResult<Option<Preferences>> {
        if self.alpha == 0.0 {
            if self.lambda.is_some_and(|l| l != 0.0) {
                return Err(CliError::config("ambiguity needs alpha != 0"));
            }
            return Ok(None);
        }
        Ok(Some(Preferences::new(self.alpha, self.lambda.unwrap_or(self.alpha))?))
    }

    pub fn require(&self) -> CliResult<Preferences> {
        self.preferences()?
            .ok_or_else(|| CliError::config("this command needs alpha != 0 (power utility)"))
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.alpha)
    }
}

impl QueryConfig {
    pub fn query(&self, dim: usize) -> CliResult<StrategyQuery> {
        let y = self.y.clone().unwrap_or_else(|| vec![0.0; dim]);
        if y.len() != dim {
            return Err(CliError::config(format!("query.y needs {dim} entries")));
        }
        Ok(StrategyQuery::new(self.t, self.horizon, y)?)
    }
}
