//! Transferring schedules from a training pool to unseen instances.
//!
//! Four schedules are scored on every test instance:
//!
//! - `linear`: `x = 0`.
//! - `single`: the MCTS schedule of one randomly chosen training instance.
//! - `average`: the schedule with the highest mean success over the
//!   training pool, searched by MCTS on the pool and compared against the
//!   per-instance schedules.
//! - `qzero`: networks pre-trained on the per-instance schedules, then
//!   fine-tuned on the test instance itself.

use std::sync::Arc;

use anyhow::Context;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qzero_core::env::PoolObjective;
use qzero_core::mcts::{run_search, MctsConfig, Merit};
use qzero_core::qzero::{
    build_pretrain_dataset, pretrain, solve_instance, PolicyValueNet, QzConfig, QzTask,
};
use qzero_core::rng::{rng_from_seed, substream};
use qzero_core::sat::build_h_info;
use qzero_core::schedule::{ScheduleGrid, ScheduleParams};
use qzero_core::Annealer;

use super::{annealer, cell_seed, fixed_row, guarded};
use crate::config::ExperimentConfig;
use crate::instances::{load_pool, pad_h_info, NamedInstance};
use crate::table::{histogram, ResultRow, ResultTable};

/// Mean training-pool success of the two transferred schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolScores {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub single_source: String,
    pub single: f64,
    pub average: f64,
}

#[derive(Debug, Clone)]
pub struct TransferReport {
    pub table: ResultTable,
    pub pool_scores: Vec<PoolScores>,
    /// `(scenario, T, counts)` over equal bins of `[0, 1]`.
    pub histograms: Vec<(String, f64, Vec<usize>)>,
}

impl TransferReport {
    pub fn mean_success(&self, scenario: &str, total_time: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .table
            .select(scenario)
            .filter(|r| r.total_time == total_time)
            .map(|r| r.success_probability)
            .collect();
        crate::table::mean(&v)
    }

    pub fn histograms_csv(&self, bins: usize) -> String {
        let mut s = String::from("scenario,T,bin_lo,bin_hi,count\n");
        for (name, t, counts) in &self.histograms {
            for (b, c) in counts.iter().enumerate() {
                s.push_str(&format!(
                    "{name},{t},{},{},{c}\n",
                    b as f64 / bins as f64,
                    (b + 1) as f64 / bins as f64
                ));
            }
        }
        s
    }
}

fn mcts_schedule(
    objective: &dyn qzero_core::Objective,
    grid: &ScheduleGrid,
    base: &MctsConfig,
    merit: Merit,
    seed: u64,
    budget: usize,
) -> anyhow::Result<ScheduleParams> {
    let cfg = MctsConfig {
        seed,
        merit,
        episodes: usize::MAX,
        query_budget: Some(budget),
        ..*base
    };
    Ok(ScheduleParams::new(run_search(objective, grid, &cfg)?.result.x))
}

fn pool_success(annealers: &[Annealer], x: &ScheduleParams) -> anyhow::Result<f64> {
    let out = qzero_core::Objective::evaluate(&PoolObjective { annealers }, x)?;
    Ok(out.success_probability.unwrap_or(f64::NAN))
}

/// Pre-trained networks for the pool; returned untouched by fine-tuning.
pub(crate) fn pretrained_net(
    cfg: &ExperimentConfig,
    grid: &ScheduleGrid,
    train: &[NamedInstance],
    labels: &[ScheduleParams],
    net_seed: u64,
    train_seed: u64,
) -> anyhow::Result<PolicyValueNet> {
    let info_len = train[0].instance.num_vars() * train[0].instance.num_clauses();
    let mut net = PolicyValueNet::new(*grid, info_len, &cfg.qzero.shape, cfg.qzero.lambda, net_seed);
    let solved: Vec<_> = train.iter().map(|i| &i.instance).zip(labels.iter().cloned()).collect();
    let samples: Vec<_> = build_pretrain_dataset(&solved, grid)?
        .iter()
        .map(|s| s.to_training(grid))
        .collect();
    pretrain(
        &mut net,
        &samples,
        cfg.qzero.pretrain_epochs,
        cfg.qzero.pretrain_batch,
        cfg.qzero.pretrain_lr,
        train_seed,
    )?;
    Ok(net)
}

/// Fine-tune a copy of `net` on one instance; the clause matrix is padded
/// to the network's width when the test family has fewer clauses.
pub(crate) fn qzero_solve(
    net: &PolicyValueNet,
    inst: &NamedInstance,
    a: &Annealer,
    grid: &ScheduleGrid,
    solve: &QzConfig,
) -> anyhow::Result<qzero_core::qzero::QzOutcome> {
    let n = inst.instance.num_vars();
    if net.info_len % n != 0 {
        anyhow::bail!("networks expect a different variable count than n = {n}");
    }
    let h = pad_h_info(&build_h_info(&inst.instance).to_vec(), n, net.info_len / n)?;
    let task = QzTask {
        objective: a,
        ground_energy: a.ground_energy(),
        h_info: Arc::new(h),
    };
    let mut local = net.clone();
    Ok(solve_instance(&mut local, &task, grid, solve, true)?)
}

pub fn run_transfer(cfg: &ExperimentConfig) -> anyhow::Result<TransferReport> {
    cfg.validate()?;
    let tc = &cfg.transfer;
    let grid = cfg.grid.build()?;
    let train = load_pool(&tc.train, cfg.seed, "train")?;
    let test = load_pool(&tc.test, cfg.seed, "test")?;
    if train.is_empty() || test.is_empty() {
        anyhow::bail!("transfer needs non-empty training and test pools");
    }
    let mut table = ResultTable::default();
    let mut pool_scores = Vec::new();
    let mut histograms = Vec::new();

    for &t in &cfg.times {
        let train_annealers = train
            .iter()
            .map(|i| annealer(i, t, cfg.dt))
            .collect::<anyhow::Result<Vec<_>>>()?;
        // per-instance optima on the training pool
        let labels = train
            .par_iter()
            .zip(&train_annealers)
            .map(|(inst, a)| {
                mcts_schedule(
                    a,
                    &grid,
                    &cfg.mcts,
                    cfg.mcts.merit,
                    cell_seed(cfg.seed, "mcts-train", &inst.id, t),
                    tc.search_budget,
                )
                .with_context(|| format!("searching {}", inst.id))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;

        let pick = rng_from_seed(substream(cfg.seed, "transfer-pick", t.to_bits())).gen_range(0..train.len());
        let single = labels[pick].clone();

        let pool = PoolObjective {
            annealers: &train_annealers,
        };
        let searched = mcts_schedule(
            &pool,
            &grid,
            &cfg.mcts,
            Merit::SuccessProbability,
            substream(cfg.seed, "mcts-pool", t.to_bits()),
            tc.search_budget,
        )?;
        let mut average = searched;
        let mut average_score = pool_success(&train_annealers, &average)?;
        for x in &labels {
            let s = pool_success(&train_annealers, x)?;
            if s > average_score {
                average = x.clone();
                average_score = s;
            }
        }
        pool_scores.push(PoolScores {
            total_time: t,
            single_source: train[pick].id.clone(),
            single: pool_success(&train_annealers, &single)?,
            average: average_score,
        });

        let net = if tc.qzero {
            Some(pretrained_net(
                cfg,
                &grid,
                &train,
                &labels,
                substream(cfg.seed, "net-init", t.to_bits()),
                substream(cfg.seed, "pretrain", t.to_bits()),
            )?)
        } else {
            None
        };

        let rows: Vec<ResultRow> = test
            .par_iter()
            .flat_map_iter(|inst| {
                let mut rows = Vec::new();
                let a = match annealer(inst, t, cfg.dt) {
                    Ok(a) => a,
                    Err(e) => return vec![ResultRow::failed(&inst.id, "setup", t, &e)],
                };
                rows.push(guarded(&inst.id, "linear", t, || fixed_row(&inst.id, "linear", &a, &grid.linear())));
                rows.push(guarded(&inst.id, "single", t, || fixed_row(&inst.id, "single", &a, &single)));
                rows.push(guarded(&inst.id, "average", t, || fixed_row(&inst.id, "average", &a, &average)));
                if let Some(net) = &net {
                    rows.push(guarded(&inst.id, "qzero", t, || {
                        let started = std::time::Instant::now();
                        let solve = QzConfig {
                            seed: cell_seed(cfg.seed, "qzero", &inst.id, t),
                            ..cfg.qzero.solve
                        };
                        let out = qzero_solve(net, inst, &a, &grid, &solve)?;
                        Ok(ResultRow {
                            instance: inst.id.clone(),
                            optimizer: "qzero".into(),
                            total_time: t,
                            energy: out.result.energy,
                            success_probability: out.result.success_probability.unwrap_or(f64::NAN),
                            queries: out.ledger.count(),
                            success_mean: None,
                            success_spread: None,
                            x: out.result.x,
                            status: "ok".into(),
                            wall_time: started.elapsed().as_secs_f64(),
                        })
                    }));
                }
                rows
            })
            .collect();
        for scenario in ["linear", "single", "average", "qzero"] {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.optimizer == scenario && r.is_ok())
                .map(|r| r.success_probability)
                .collect();
            if !v.is_empty() {
                histograms.push((scenario.to_string(), t, histogram(&v, tc.bins)));
            }
        }
        table.rows.extend(rows);
    }

    table.recheck(|row| {
        let inst = test.iter().find(|i| i.id == row.instance)?;
        annealer(inst, row.total_time, cfg.dt).ok()
    });
    table.sort();
    Ok(TransferReport {
        table,
        pool_scores,
        histograms,
    })
}
