//! Fidelity against annealing time, and budget-matched MCTS against SD.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{annealer, cell_seed, fixed_row, guarded, mcts_row, sd_row};
use crate::config::ExperimentConfig;
use crate::instances::{load_pool, NamedInstance};
use crate::table::{mean, median, ResultRow, ResultTable};

/// Per-`T` aggregate of a sweep or comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub instances: usize,
    pub median_mcts: Option<f64>,
    /// Median over instances of SD's best over restarts.
    pub median_sd: Option<f64>,
    /// Mean over instances of SD's per-restart mean.
    pub mean_sd_restart: Option<f64>,
    pub mean_linear: Option<f64>,
    /// Largest `|q_mcts - q_sd| / q_mcts` over instances.
    pub max_budget_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub table: ResultTable,
    pub summary: Vec<CompareSummary>,
    pub instances: Vec<NamedInstance>,
}

fn budget_cell(
    cfg: &ExperimentConfig,
    inst: &NamedInstance,
    t: f64,
    with_linear: bool,
) -> Vec<ResultRow> {
    let grid = match cfg.grid.build() {
        Ok(g) => g,
        Err(e) => return vec![ResultRow::failed(&inst.id, "setup", t, &e.into())],
    };
    let a = match annealer(inst, t, cfg.dt) {
        Ok(a) => a,
        Err(e) => return vec![ResultRow::failed(&inst.id, "setup", t, &e)],
    };
    let mut rows = Vec::new();
    if with_linear {
        rows.push(guarded(&inst.id, "linear", t, || {
            fixed_row(&inst.id, "linear", &a, &grid.linear())
        }));
    }
    let mcts = guarded(&inst.id, "mcts", t, || {
        mcts_row(&inst.id, &a, &grid, &cfg.mcts, cell_seed(cfg.seed, "mcts", &inst.id, t), cfg.budget)
    });
    // SD gets exactly the queries MCTS used
    let sd_budget = if mcts.is_ok() { mcts.queries } else { cfg.budget };
    rows.push(mcts);
    rows.push(guarded(&inst.id, "sd", t, || {
        sd_row(&inst.id, &a, &grid, &cfg.sd, cell_seed(cfg.seed, "sd", &inst.id, t), sd_budget)
    }));
    rows
}

fn summarize(table: &ResultTable, times: &[f64]) -> Vec<CompareSummary> {
    times
        .iter()
        .map(|&t| {
            let at = |opt: &'static str| -> Vec<&ResultRow> {
                table.select(opt).filter(|r| r.total_time == t).collect()
            };
            let mcts = at("mcts");
            let sd = at("sd");
            let lin = at("linear");
            let succ = |rows: &[&ResultRow]| rows.iter().map(|r| r.success_probability).collect::<Vec<_>>();
            let mut mismatch: f64 = 0.0;
            for m in &mcts {
                if let Some(s) = sd.iter().find(|s| s.instance == m.instance) {
                    let q = m.queries.max(1) as f64;
                    mismatch = mismatch.max((m.queries as f64 - s.queries as f64).abs() / q);
                }
            }
            CompareSummary {
                total_time: t,
                instances: mcts.len().max(sd.len()),
                median_mcts: median(&succ(&mcts)),
                median_sd: median(&succ(&sd)),
                mean_sd_restart: mean(&sd.iter().filter_map(|r| r.success_mean).collect::<Vec<_>>()),
                mean_linear: mean(&succ(&lin)),
                max_budget_mismatch: mismatch,
            }
        })
        .collect()
}

fn run(cfg: &ExperimentConfig, pool: &str, with_linear: bool) -> anyhow::Result<SweepReport> {
    cfg.validate()?;
    let instances = load_pool(&cfg.instances, cfg.seed, pool)?;
    let cells: Vec<(usize, f64)> = (0..instances.len())
        .flat_map(|i| cfg.times.iter().map(move |&t| (i, t)))
        .collect();
    let rows: Vec<ResultRow> = cells
        .par_iter()
        .flat_map_iter(|&(i, t)| budget_cell(cfg, &instances[i], t, with_linear))
        .collect();
    let mut table = ResultTable { rows };
    table.recheck(|row| {
        let inst = instances.iter().find(|i| i.id == row.instance)?;
        annealer(inst, row.total_time, cfg.dt).ok()
    });
    table.sort();
    let summary = summarize(&table, &cfg.times);
    Ok(SweepReport {
        table,
        summary,
        instances,
    })
}

/// Linear schedule, restarted SD and MCTS for every (instance, `T`). MCTS
/// runs first under `cfg.budget`; SD then gets exactly as many queries.
pub fn run_sweep(cfg: &ExperimentConfig) -> anyhow::Result<SweepReport> {
    run(cfg, "sweep", true)
}

/// MCTS against SD at matched budgets. Cells whose query counts differ by
/// more than 10% are marked failed.
pub fn run_compare(cfg: &ExperimentConfig) -> anyhow::Result<SweepReport> {
    let mut report = run(cfg, "compare", false)?;
    let rows = report.table.rows.clone();
    for row in report.table.rows.iter_mut().filter(|r| r.optimizer == "sd" && r.is_ok()) {
        if let Some(m) = rows.iter().find(|m| {
            m.optimizer == "mcts" && m.is_ok() && m.instance == row.instance && m.total_time == row.total_time
        }) {
            let gap = (m.queries as f64 - row.queries as f64).abs() / m.queries.max(1) as f64;
            if gap > 0.1 {
                row.status = format!("error: query budgets differ by {:.1}%", 100.0 * gap);
            }
        }
    }
    Ok(report)
}
