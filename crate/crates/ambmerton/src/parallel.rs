//! Rayon drivers. Results never depend on the number of threads.

use ambmerton_core::learning::{
    simulate_batch, summarize, BatchStats, SimulationConfig, SimulationResult, Strategy, TableRow, TabulatedStrategy,
};
use ambmerton_core::{Error, MarketModel, Preferences, Result};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

pub const THREADS_ENV: &str = "AMBMERTON_THREADS";

/// Caps the global pool at `AMBMERTON_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Batches run concurrently and are folded in index order, so the result is
/// bit-identical to `learning::simulate_utility`.
pub fn simulate<S: Strategy + ?Sized>(
    model: &MarketModel,
    prefs: &Preferences,
    strategy: &S,
    x0: f64,
    horizon: f64,
    config: &SimulationConfig,
) -> Result<SimulationResult> {
    let batches = (0..config.n_batches())
        .into_par_iter()
        .map(|b| simulate_batch(model, prefs, strategy, x0, horizon, config, b))
        .collect::<Result<Vec<_>>>()?;
    let mut total = BatchStats::new(model.n_scenarios());
    for b in &batches {
        total.merge(b);
    }
    summarize(model, prefs, &total)
}

/// `TabulatedStrategy::build` with the rows computed concurrently.
pub fn tabulate<F>(model: &MarketModel, n_steps: usize, dt: f64, f: F) -> Result<TabulatedStrategy>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if model.dim() != 1 {
        return Err(Error::Unsupported("tabulated strategies are single-asset".into()));
    }
    let rows = (0..n_steps)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * dt;
            TableRow::build(model, t, |y| f(t, y))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TabulatedStrategy::from_rows(rows))
}
