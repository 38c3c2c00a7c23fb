//! The experiments behind the CLI subcommands.
//!
//! Every experiment is a set of independent cells (instance, `T`, method)
//! scheduled on the rayon pool. Rows are sorted before they are written,
//! so results do not depend on scheduling order.

mod diagnostics;
mod efficiency;
mod sweep;
mod transfer;

pub use diagnostics::{run_diagnostics, DiagnosticsReport, MinGapRow, PeakRow};
pub use efficiency::{run_efficiency, CurvePoint, EfficiencyReport, LossComparison, WinRow};
pub use sweep::{run_compare, run_sweep, CompareSummary, SweepReport};
pub use transfer::{run_transfer, PoolScores, TransferReport};

use std::time::Instant;

use qzero_core::mcts::{run_search, MctsConfig};
use qzero_core::rng::substream;
use qzero_core::schedule::{ScheduleGrid, ScheduleParams};
use qzero_core::sd::{sd_search, SdConfig};
use qzero_core::Annealer;

use crate::instances::NamedInstance;
use crate::table::{mean, spread, ResultRow};

/// Seed of a cell's named stream: `name` scoped to the instance id and `T`.
pub fn cell_seed(root: u64, name: &str, instance: &str, total_time: f64) -> u64 {
    substream(root, &format!("{name}/{instance}"), total_time.to_bits())
}

pub fn annealer(inst: &NamedInstance, total_time: f64, dt: f64) -> anyhow::Result<Annealer> {
    Ok(Annealer::new(&inst.instance, total_time)?.with_dt(dt))
}

fn ok_row(
    inst: &str,
    optimizer: &str,
    total_time: f64,
    energy: f64,
    success: f64,
    queries: usize,
    x: Vec<f64>,
    started: Instant,
) -> ResultRow {
    ResultRow {
        instance: inst.to_string(),
        optimizer: optimizer.to_string(),
        total_time,
        energy,
        success_probability: success,
        queries,
        success_mean: None,
        success_spread: None,
        x,
        status: "ok".into(),
        wall_time: started.elapsed().as_secs_f64(),
    }
}

/// Score a fixed schedule on one annealer without searching.
pub fn fixed_row(id: &str, label: &str, a: &Annealer, x: &ScheduleParams) -> anyhow::Result<ResultRow> {
    let started = Instant::now();
    let ev = a.anneal(x)?;
    Ok(ok_row(id, label, a.total_time(), ev.energy, ev.success_probability, 0, x.x.clone(), started))
}

/// MCTS with a soft query budget; the returned row reports the best
/// schedule found.
pub fn mcts_row(
    id: &str,
    a: &Annealer,
    grid: &ScheduleGrid,
    base: &MctsConfig,
    seed: u64,
    budget: usize,
) -> anyhow::Result<ResultRow> {
    let started = Instant::now();
    let cfg = MctsConfig {
        seed,
        episodes: usize::MAX,
        query_budget: Some(budget),
        ..*base
    };
    let out = run_search(a, grid, &cfg)?;
    let r = &out.result;
    Ok(ok_row(
        id,
        "mcts",
        a.total_time(),
        r.energy,
        r.success_probability.unwrap_or(f64::NAN),
        out.ledger.count(),
        r.x.clone(),
        started,
    ))
}

/// Restarted SD under a hard query cap. The row reports the best schedule
/// over restarts plus the mean and spread of the per-restart results.
pub fn sd_row(
    id: &str,
    a: &Annealer,
    grid: &ScheduleGrid,
    base: &SdConfig,
    seed: u64,
    budget: usize,
) -> anyhow::Result<ResultRow> {
    let started = Instant::now();
    let cfg = SdConfig {
        seed,
        restarts: usize::MAX,
        query_budget: Some(budget),
        ..*base
    };
    let out = sd_search(a, grid, &cfg)?;
    let r = &out.result;
    let per: Vec<f64> = out
        .restarts
        .iter()
        .filter_map(|l| l.success_probability)
        .collect();
    let mut row = ok_row(
        id,
        "sd",
        a.total_time(),
        r.energy,
        r.success_probability.unwrap_or(f64::NAN),
        out.ledger.count(),
        r.x.clone(),
        started,
    );
    row.success_mean = mean(&per);
    row.success_spread = spread(&per);
    Ok(row)
}

/// Run `f`, turning an error into a failed row instead of aborting.
pub fn guarded<F>(id: &str, optimizer: &str, total_time: f64, f: F) -> ResultRow
where
    F: FnOnce() -> anyhow::Result<ResultRow>,
{
    f().unwrap_or_else(|e| ResultRow::failed(id, optimizer, total_time, &e))
}
