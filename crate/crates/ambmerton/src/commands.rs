//! One function per subcommand. Each is a pure function of the resolved
//! config and returns the text to emit.

use ambmerton_core::ambiguity::{adjust_prior, ambiguous_fraction_with, kmm_certainty_equivalent, kmm_value};
use ambmerton_core::backtest::{strategy_path, BacktestConfig, NaiveDrift};
use ambmerton_core::bayes::{fraction_for_gamma, optimal_fraction, posterior, value as bayes_value};
use ambmerton_core::learning::{
    value_log_learning, value_log_precommit, value_of_learning, ConstantStrategy, Estimate, FnStrategy,
    SimulationConfig, SimulationResult, Strategy,
};
use ambmerton_core::precommit::precommit_fraction;
use ambmerton_core::twopoint::{f_hat, upper_weight};
use ambmerton_core::{MarketModel, Preferences, StrategyQuery};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Axis, RunConfig, StrategyKind, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::io::{export_csv, format_number, load_prices};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fraction,
    Weight,
    Value,
    Precommit,
    Adjust,
    LearningValue,
    Simulate,
    Sweep,
    Backtest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fraction => "fraction",
            Command::Weight => "weight",
            Command::Value => "value",
            Command::Precommit => "precommit",
            Command::Adjust => "adjust",
            Command::LearningValue => "learning-value",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Backtest => "backtest",
        }
    }

    /// Commands whose output is a CSV table rather than a JSON record.
    pub fn is_table(&self) -> bool {
        matches!(self, Command::Sweep | Command::Backtest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct Header<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Record<'a, T> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn record<T: Serialize>(cmd: Command, cfg: &RunConfig, result: T) -> CliResult<Output> {
    let r = Record {
        schema_version: SCHEMA_VERSION,
        command: cmd.name(),
        config: cfg,
        result,
    };
    let mut text = serde_json::to_string(&r).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    Ok(Output { text, warnings: vec![] })
}

/// `# {"schema_version":…,"command":…,"config":…}` line opening every table.
pub fn header_line(cmd: Command, cfg: &RunConfig) -> String {
    let h = Header {
        schema_version: SCHEMA_VERSION,
        command: cmd.name(),
        config: cfg,
    };
    format!("# {}\n", serde_json::to_string(&h).expect("config serializes"))
}

pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<Output> {
    match cmd {
        Command::Fraction => fraction(cfg),
        Command::Weight => weight(cfg),
        Command::Value => value(cfg),
        Command::Precommit => precommit(cfg),
        Command::Adjust => adjust(cfg),
        Command::LearningValue => learning_value(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sweep => sweep(cfg),
        Command::Backtest => backtest(cfg),
    }
}

/// Bayesian preferences, or the ambiguity adjustment when `λ ≠ α`.
fn effective_model(cfg: &RunConfig, prefs: &Preferences) -> CliResult<(MarketModel, Option<f64>)> {
    if prefs.is_ambiguity_neutral() {
        return Ok((cfg.market.model()?, None));
    }
    let two = cfg.market.two_point()?;
    let adj = adjust_prior(&two, prefs, cfg.query.horizon)?;
    Ok((two.with_p(adj.p_mod)?.market().clone(), Some(adj.p_mod)))
}

#[derive(Serialize)]
struct FractionOut {
    kappa: Vec<f64>,
    weights: Vec<f64>,
    at_horizon: bool,
    bounds: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_mod: Option<f64>,
}

fn fraction(cfg: &RunConfig) -> CliResult<Output> {
    let model = cfg.market.model()?;
    let q = cfg.query.query(model.dim())?;
    let (res, p_mod) = match cfg.prefs.preferences()? {
        None => (fraction_for_gamma(&model, 1.0, &q)?, None),
        Some(prefs) if prefs.is_ambiguity_neutral() => (optimal_fraction(&model, &prefs, &q)?, None),
        Some(prefs) => {
            let two = cfg.market.two_point()?;
            let adj = adjust_prior(&two, &prefs, q.horizon())?;
            (ambiguous_fraction_with(&two, &prefs, &q, &adj)?, Some(adj.p_mod))
        }
    };
    record(
        Command::Fraction,
        cfg,
        FractionOut {
            kappa: res.kappa,
            weights: res.scenario_weights,
            at_horizon: res.at_horizon,
            bounds: model.fraction_bounds(cfg.prefs.gamma()),
            p_mod,
        },
    )
}

#[derive(Serialize)]
struct WeightOut {
    upper_weight: f64,
    lower_weight: f64,
    f_hat: f64,
    kappa_hi: Vec<f64>,
    kappa_lo: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_mod: Option<f64>,
}

fn weight(cfg: &RunConfig) -> CliResult<Output> {
    let mut two = cfg.market.two_point()?;
    let gamma = cfg.prefs.gamma();
    let mut p_mod = None;
    if let Some(prefs) = cfg.prefs.preferences()? {
        if !prefs.is_ambiguity_neutral() {
            let adj = adjust_prior(&two, &prefs, cfg.query.horizon)?;
            two = two.with_p(adj.p_mod)?;
            p_mod = Some(adj.p_mod);
        }
    }
    let q = cfg.query.query(two.dim())?;
    let w = upper_weight(&two, gamma, &q)?;
    record(
        Command::Weight,
        cfg,
        WeightOut {
            upper_weight: w,
            lower_weight: 1.0 - w,
            f_hat: f_hat(&two, gamma, &q)?,
            kappa_hi: two.market().merton_fraction(gamma, 0),
            kappa_lo: two.market().merton_fraction(gamma, 1),
            p_mod,
        },
    )
}

#[derive(Serialize)]
struct ValueOut {
    utility: &'static str,
    value: f64,
    certainty_equivalent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kmm_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kmm_certainty_equivalent: Option<f64>,
}

fn value(cfg: &RunConfig) -> CliResult<Output> {
    let horizon = cfg.query.horizon;
    let x0 = cfg.x0;
    let out = match cfg.prefs.preferences()? {
        None => {
            let v = x0.ln() + value_log_learning(&cfg.market.two_point()?, horizon)?;
            ValueOut {
                utility: "log",
                value: v,
                certainty_equivalent: v.exp(),
                kmm_value: None,
                kmm_certainty_equivalent: None,
            }
        }
        Some(prefs) => {
            let model = cfg.market.model()?;
            let v = bayes_value(&model, &prefs, x0, horizon)?;
            let a = prefs.alpha();
            let (kv, kce) = if prefs.is_ambiguity_neutral() {
                (None, None)
            } else {
                let two = cfg.market.two_point()?;
                (
                    Some(kmm_value(&two, &prefs, x0, horizon)?),
                    Some(kmm_certainty_equivalent(&two, &prefs, x0, horizon)?),
                )
            };
            ValueOut {
                utility: "power",
                value: v,
                certainty_equivalent: (a * v).powf(1.0 / a),
                kmm_value: kv,
                kmm_certainty_equivalent: kce,
            }
        }
    };
    record(Command::Value, cfg, out)
}

#[derive(Serialize)]
struct PrecommitOut {
    kappa_pre: Vec<f64>,
    upper_weight_pre: f64,
    foc_residual: f64,
    value_pre: f64,
    value_learning: f64,
}

fn precommit(cfg: &RunConfig) -> CliResult<Output> {
    let two = cfg.market.two_point()?;
    let horizon = cfg.query.horizon;
    let x0 = cfg.x0;
    let out = match cfg.prefs.preferences()? {
        None => PrecommitOut {
            kappa_pre: two.market().weighted_fraction(1.0, &[two.p(), 1.0 - two.p()]),
            upper_weight_pre: two.p(),
            foc_residual: 0.0,
            value_pre: x0.ln() + value_log_precommit(&two, horizon)?,
            value_learning: x0.ln() + value_log_learning(&two, horizon)?,
        },
        Some(prefs) => {
            let r = precommit_fraction(&two, prefs.alpha(), horizon)?;
            let bayes = Preferences::bayesian(prefs.alpha())?;
            PrecommitOut {
                value_pre: constant_value(two.market(), prefs.alpha(), x0, horizon, &r.kappa_pre),
                value_learning: bayes_value(two.market(), &bayes, x0, horizon)?,
                kappa_pre: r.kappa_pre,
                upper_weight_pre: r.upper_weight_pre,
                foc_residual: r.foc_residual,
            }
        }
    };
    record(Command::Precommit, cfg, out)
}

/// `(x₀^α/α) Σ_k p_k exp(α(κ·μ_k − ½(1−α)|σᵀκ|²)T)` for constant `κ`.
pub fn constant_value(model: &MarketModel, alpha: f64, x0: f64, horizon: f64, kappa: &[f64]) -> f64 {
    let d = model.dim();
    let sigma = model.sigma();
    let var: f64 = (0..d)
        .map(|j| (0..d).map(|i| sigma[(i, j)] * kappa[i]).sum::<f64>().powi(2))
        .sum();
    let terms: Vec<f64> = (0..model.n_scenarios())
        .map(|k| {
            let mu: f64 = model.drift(k).iter().zip(kappa).map(|(m, x)| m * x).sum();
            model.prior()[k].ln() + alpha * (mu - 0.5 * (1.0 - alpha) * var) * horizon
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    (alpha * x0.ln() + lse).exp() / alpha
}

#[derive(Serialize)]
struct AdjustOut {
    p: f64,
    p_mod: f64,
    q1: f64,
    q2: f64,
    ytilde: f64,
    objective: f64,
    case: Option<&'static str>,
    kmm_value: f64,
}

fn adjust(cfg: &RunConfig) -> CliResult<Output> {
    let two = cfg.market.two_point()?;
    let prefs = cfg.prefs.require()?;
    let horizon = cfg.query.horizon;
    let adj = adjust_prior(&two, &prefs, horizon)?;
    record(
        Command::Adjust,
        cfg,
        AdjustOut {
            p: two.p(),
            p_mod: adj.p_mod,
            q1: adj.q1,
            q2: adj.q2,
            ytilde: adj.ytilde,
            objective: adj.objective,
            case: adj.case.map(|c| c.id()),
            kmm_value: kmm_value(&two, &prefs, cfg.x0, horizon)?,
        },
    )
}

#[derive(Serialize)]
struct LearningValueOut {
    value_learning: f64,
    value_precommit: f64,
    value_of_learning: f64,
}

fn learning_value(cfg: &RunConfig) -> CliResult<Output> {
    let two = cfg.market.two_point()?;
    let horizon = cfg.query.horizon;
    record(
        Command::LearningValue,
        cfg,
        LearningValueOut {
            value_learning: value_log_learning(&two, horizon)?,
            value_precommit: value_log_precommit(&two, horizon)?,
            value_of_learning: value_of_learning(&two, horizon)?,
        },
    )
}

#[derive(Serialize)]
struct EstimateOut {
    mean: f64,
    se: f64,
}

impl From<Estimate> for EstimateOut {
    fn from(e: Estimate) -> Self {
        EstimateOut { mean: e.mean, se: e.se }
    }
}

#[derive(Serialize)]
struct SimulateOut {
    strategy: StrategyKind,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    mixture: EstimateOut,
    kmm: EstimateOut,
    per_scenario: Vec<EstimateOut>,
    /// Closed-form value of the simulated strategy, where one exists.
    reference: Option<f64>,
}

/// A strategy ready for simulation plus its closed-form value.
pub struct Prepared {
    pub strategy: Box<dyn Strategy>,
    pub reference: Option<f64>,
}

/// Learning rule for the given model: tabulated for one asset, evaluated
/// on the fly otherwise.
pub fn learning_strategy(model: &MarketModel, gamma: f64, n_steps: usize, dt: f64, horizon: f64) -> CliResult<Box<dyn Strategy>> {
    if model.dim() == 1 {
        let table = parallel::tabulate(model, n_steps, dt, |t, y| {
            let q = StrategyQuery::new(t, horizon, vec![y])?;
            Ok(fraction_for_gamma(model, gamma, &q)?.kappa[0])
        })?;
        return Ok(Box::new(table));
    }
    let m = model.clone();
    Ok(Box::new(FnStrategy(move |_: usize, t: f64, y: &[f64], out: &mut [f64]| {
        let k = StrategyQuery::new(t, horizon, y.to_vec())
            .and_then(|q| fraction_for_gamma(&m, gamma, &q))
            .map(|r| r.kappa)
            .unwrap_or_else(|_| vec![f64::NAN; out.len()]);
        out.copy_from_slice(&k);
    })))
}

pub fn prepare_strategy(cfg: &RunConfig, prefs: &Preferences, sim: &SimulationConfig) -> CliResult<Prepared> {
    let horizon = cfg.query.horizon;
    let dt = horizon / sim.n_steps as f64;
    let gamma = prefs.gamma();
    let model = cfg.market.model()?;
    Ok(match cfg.simulation.strategy {
        StrategyKind::Constant => {
            let k = cfg
                .simulation
                .kappa
                .clone()
                .ok_or_else(|| CliError::config("simulation.kappa is required for the constant strategy"))?;
            if k.len() != model.dim() {
                return Err(CliError::config(format!("simulation.kappa needs {} entries", model.dim())));
            }
            Prepared {
                reference: Some(constant_value(&model, prefs.alpha(), cfg.x0, horizon, &k)),
                strategy: Box::new(ConstantStrategy(k)),
            }
        }
        StrategyKind::Precommit => {
            let two = cfg.market.two_point()?;
            let r = precommit_fraction(&two, prefs.alpha(), horizon)?;
            Prepared {
                reference: Some(constant_value(&model, prefs.alpha(), cfg.x0, horizon, &r.kappa_pre)),
                strategy: Box::new(ConstantStrategy(r.kappa_pre)),
            }
        }
        StrategyKind::Learning => Prepared {
            strategy: learning_strategy(&model, gamma, sim.n_steps, dt, horizon)?,
            reference: Some(bayes_value(&model, &Preferences::bayesian(prefs.alpha())?, cfg.x0, horizon)?),
        },
        StrategyKind::Ambiguity => {
            let (eff, _) = effective_model(cfg, prefs)?;
            let reference = if prefs.is_ambiguity_neutral() {
                bayes_value(&model, prefs, cfg.x0, horizon)?
            } else {
                kmm_value(&cfg.market.two_point()?, prefs, cfg.x0, horizon)?
            };
            Prepared {
                strategy: learning_strategy(&eff, gamma, sim.n_steps, dt, horizon)?,
                reference: Some(reference),
            }
        }
    })
}

pub fn simulation_config(cfg: &RunConfig) -> CliResult<SimulationConfig> {
    let s = &cfg.simulation;
    let mut sim = SimulationConfig::with_dt(s.n_paths, cfg.query.horizon, s.dt, s.seed)?;
    if s.batch_size == 0 {
        return Err(CliError::config("simulation.batch_size must be positive"));
    }
    sim.batch_size = s.batch_size;
    Ok(sim)
}

/// Runs the configured simulation.
pub fn run_simulation(cfg: &RunConfig) -> CliResult<(SimulationResult, Option<f64>, SimulationConfig)> {
    let prefs = cfg.prefs.require()?;
    let sim = simulation_config(cfg)?;
    let model = cfg.market.model()?;
    let prepared = prepare_strategy(cfg, &prefs, &sim)?;
    let res = parallel::simulate(&model, &prefs, prepared.strategy.as_ref(), cfg.x0, cfg.query.horizon, &sim)?;
    Ok((res, prepared.reference, sim))
}

fn simulate(cfg: &RunConfig) -> CliResult<Output> {
    let (res, reference, sim) = run_simulation(cfg)?;
    record(
        Command::Simulate,
        cfg,
        SimulateOut {
            strategy: cfg.simulation.strategy,
            n_paths: res.n_paths,
            n_steps: sim.n_steps,
            dt: cfg.query.horizon / sim.n_steps as f64,
            mixture: res.mixture.into(),
            kmm: res.kmm.into(),
            per_scenario: res.per_scenario.into_iter().map(Into::into).collect(),
            reference,
        },
    )
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub profile_alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub p: f64,
    pub p_mod: f64,
    pub horizon: f64,
    pub t: f64,
    pub y: Vec<f64>,
    pub weight_lower: f64,
    /// `weight_lower` minus the log investor's lower weight.
    pub diff_to_log: f64,
    pub kappa: Vec<f64>,
    pub weight_lower_precommit: f64,
    pub value_of_learning: Option<f64>,
}

fn point_config(cfg: &RunConfig, axis: Axis, v: f64) -> CliResult<RunConfig> {
    let mut c = cfg.clone();
    let single = |what: &str| {
        if cfg.market.dim() == 1 {
            Ok(())
        } else {
            Err(CliError::config(format!("axis `{what}` needs a single asset")))
        }
    };
    match axis {
        Axis::T => c.query.horizon = v,
        Axis::P => c.market.p = v,
        Axis::Alpha => c.prefs.alpha = v,
        Axis::Lambda => c.prefs.lambda = Some(v),
        Axis::MuHi => {
            single("mu_hi")?;
            c.market.mu_hi = vec![v];
        }
        Axis::Sigma => {
            single("sigma")?;
            c.market.sigma = vec![vec![v]];
        }
        Axis::Y => {
            single("y")?;
            c.query.y = Some(vec![v]);
        }
    }
    Ok(c)
}

/// Evaluates one grid point for the investor with risk exponent `alpha`
/// (`0` is log utility).
pub fn sweep_point(cfg: &RunConfig, axis: Axis, v: f64, alpha: f64) -> CliResult<SweepRow> {
    let mut c = point_config(cfg, axis, v)?;
    if axis != Axis::Alpha {
        c.prefs.alpha = alpha;
    }
    if axis != Axis::Lambda {
        c.prefs.lambda = None;
    }
    let alpha = c.prefs.alpha;
    let two = c.market.two_point()?;
    let q = c.query.query(two.dim())?;
    let horizon = q.horizon();
    let gamma = c.prefs.gamma();
    let prefs = c.prefs.preferences()?;
    let p = two.p();
    let p_mod = match &prefs {
        Some(pr) if !pr.is_ambiguity_neutral() => adjust_prior(&two, pr, horizon)?.p_mod,
        _ => p,
    };
    let eff = two.with_p(p_mod)?;
    // the log investor's weight is the posterior itself
    let w = match prefs {
        Some(_) => upper_weight(&eff, gamma, &q)?,
        None => posterior(eff.market(), q.t(), q.y())[0],
    };
    let log_lower = posterior(two.market(), q.t(), q.y())[1];
    let weight_lower_precommit = match prefs {
        Some(pr) => 1.0 - precommit_fraction(&eff, pr.alpha(), horizon)?.upper_weight_pre,
        None => 1.0 - p_mod,
    };
    let value_of_learning = if two.dim() == 1 {
        Some(value_of_learning(&two, horizon)?)
    } else {
        None
    };
    Ok(SweepRow {
        value: v,
        profile_alpha: alpha,
        gamma,
        lambda: c.prefs.lambda.unwrap_or(alpha),
        p,
        p_mod,
        horizon,
        t: q.t(),
        y: q.y().to_vec(),
        weight_lower: 1.0 - w,
        diff_to_log: (1.0 - w) - log_lower,
        kappa: eff.market().weighted_fraction(gamma, &[w, 1.0 - w]),
        weight_lower_precommit,
        value_of_learning,
    })
}

fn indexed(name: &str, d: usize) -> Vec<String> {
    if d == 1 {
        vec![name.to_string()]
    } else {
        (1..=d).map(|i| format!("{name}_{i}")).collect()
    }
}

pub fn sweep_columns(d: usize) -> Vec<String> {
    let mut c: Vec<String> = ["axis", "value", "profile_alpha", "gamma", "lambda", "p", "p_mod", "T", "t"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    c.extend(indexed("y", d));
    c.extend(["weight_lower".to_string(), "diff_to_log".to_string()]);
    c.extend(indexed("kappa", d));
    c.extend(["weight_lower_precommit".to_string(), "value_of_learning".to_string()]);
    c
}

/// All rows in grid order (profiles vary fastest).
pub fn sweep_rows(cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let axis = cfg
        .sweep
        .axis
        .ok_or_else(|| CliError::config("sweep.axis is required (T, p, alpha, lambda, mu_hi, sigma or y)"))?;
    if cfg.sweep.grid.is_empty() {
        return Err(CliError::config("sweep.grid is empty"));
    }
    let profiles: Vec<f64> = match axis {
        // the axis itself is the investor
        Axis::Alpha => vec![f64::NAN],
        Axis::Lambda => vec![cfg.prefs.alpha],
        _ => cfg.sweep.profiles.clone(),
    };
    if profiles.is_empty() {
        return Err(CliError::config("sweep.profiles is empty"));
    }
    let tasks: Vec<(f64, f64)> = cfg
        .sweep
        .grid
        .iter()
        .flat_map(|&v| profiles.iter().map(move |&a| (v, a)))
        .collect();
    tasks.par_iter().map(|&(v, a)| sweep_point(cfg, axis, v, a)).collect()
}

fn sweep(cfg: &RunConfig) -> CliResult<Output> {
    let rows = sweep_rows(cfg)?;
    let axis = cfg.sweep.axis.expect("checked by sweep_rows");
    let mut buf = header_line(Command::Sweep, cfg).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(sweep_columns(cfg.market.dim())).map_err(CliError::io)?;
        for r in &rows {
            let mut rec = vec![axis.name().to_string()];
            rec.extend(
                [r.value, r.profile_alpha, r.gamma, r.lambda, r.p, r.p_mod, r.horizon, r.t]
                    .iter()
                    .map(|x| format_number(*x)),
            );
            rec.extend(r.y.iter().map(|x| format_number(*x)));
            rec.push(format_number(r.weight_lower));
            rec.push(format_number(r.diff_to_log));
            rec.extend(r.kappa.iter().map(|x| format_number(*x)));
            rec.push(format_number(r.weight_lower_precommit));
            rec.push(r.value_of_learning.map(format_number).unwrap_or_default());
            w.write_record(&rec).map_err(CliError::io)?;
        }
        w.flush()?;
    }
    Ok(Output {
        text: String::from_utf8(buf).expect("csv output is UTF-8"),
        warnings: vec![],
    })
}

pub fn backtest_config(cfg: &RunConfig) -> CliResult<BacktestConfig> {
    if cfg.market.dim() != 1 || cfg.market.scenarios.is_some() {
        return Err(CliError::config("backtest needs a single asset with the two-point prior"));
    }
    let b = &cfg.backtest;
    Ok(BacktestConfig {
        window: b.window,
        trading_days_per_year: b.trading_days_per_year,
        mu_hi: cfg.market.mu_hi[0],
        mu_lo: cfg.market.mu_lo[0],
        p: cfg.market.p,
        prefs: cfg.prefs.require()?,
        horizon: cfg.query.horizon,
        naive: b
            .naive
            .iter()
            .map(|n| NaiveDrift {
                label: n.label.clone(),
                mu: n.mu,
            })
            .collect(),
    })
}

fn backtest(cfg: &RunConfig) -> CliResult<Output> {
    let path = cfg
        .backtest
        .prices
        .as_ref()
        .ok_or_else(|| CliError::config("backtest.prices (a date,price CSV) is required"))?;
    let bc = backtest_config(cfg)?;
    let series = load_prices(path)?;
    let sp = strategy_path(&series, &bc)?;
    let mut warnings = vec![];
    if sp.truncated {
        warnings.push(format!(
            "series extends beyond the horizon T = {}; later dates were dropped",
            bc.horizon
        ));
    }
    let mut buf = header_line(Command::Backtest, cfg).into_bytes();
    export_csv(&sp, &mut buf).map_err(CliError::io)?;
    Ok(Output {
        text: String::from_utf8(buf).expect("csv output is UTF-8"),
        warnings,
    })
}
