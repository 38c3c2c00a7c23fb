//! Query efficiency of MCTS, QZero with pre-training and QZero without.
//!
//! Every test instance is solved once per seed by each method. QZero-pre
//! and QZero-nopre share their network initialisation seed, so the only
//! difference within a pair is pre-training. A second, cheaper study
//! compares the loss of fresh and pre-trained networks on held-out samples
//! built from MCTS solutions of the test instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qzero_core::env::SearchResult;
use qzero_core::mcts::{run_search, MctsConfig};
use qzero_core::qzero::{build_pretrain_dataset, PolicyValueNet, QzConfig, TrainingSample};
use qzero_core::rng::substream;
use qzero_core::schedule::ScheduleParams;

use super::transfer::{pretrained_net, qzero_solve};
use super::{annealer, cell_seed};
use crate::config::ExperimentConfig;
use crate::instances::load_pool;
use crate::table::{mean, median};

/// Best-so-far energy after `query` queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub instance: String,
    pub seed: u64,
    pub query: usize,
    pub best_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRow {
    pub method: String,
    pub instance: String,
    pub seed: u64,
    pub queries: usize,
    /// Queries until `E - E_g < epsilon` was first seen; `None` if never.
    pub queries_to_win: Option<usize>,
    pub best_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossComparison {
    pub seed: u64,
    pub fresh: f64,
    pub pretrained: f64,
}

#[derive(Debug, Clone)]
pub struct EfficiencyReport {
    pub curves: Vec<CurvePoint>,
    pub wins: Vec<WinRow>,
    pub losses: Vec<LossComparison>,
    pub checkpoints: Vec<usize>,
}

/// Median of optional counts with `None` ranked above every value. The
/// result is `None` when the median lands on a missing entry.
pub fn censored_median(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<Option<usize>> = values.to_vec();
    v.sort_by_key(|x| x.unwrap_or(usize::MAX));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2].map(|x| x as f64)
    } else {
        Some(0.5 * (v[k / 2 - 1]? as f64 + v[k / 2]? as f64))
    }
}

impl EfficiencyReport {
    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.wins.iter().map(|w| w.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn queries_to_win(&self, method: &str) -> Vec<Option<usize>> {
        self.wins
            .iter()
            .filter(|w| w.method == method)
            .map(|w| w.queries_to_win)
            .collect()
    }

    pub fn median_queries_to_win(&self, method: &str) -> Option<f64> {
        censored_median(&self.queries_to_win(method))
    }

    pub fn mean_loss(&self) -> (Option<f64>, Option<f64>) {
        let f: Vec<f64> = self.losses.iter().map(|l| l.fresh).collect();
        let p: Vec<f64> = self.losses.iter().map(|l| l.pretrained).collect();
        (mean(&f), mean(&p))
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("method,instance,seed,query,best_energy\n");
        for c in &self.curves {
            let e = c.best_energy.map(|e| e.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{},{e}\n", c.method, c.instance, c.seed, c.query));
        }
        s
    }

    /// Per method and checkpoint: median best energy and the fraction of
    /// runs that had won by then.
    pub fn medians_csv(&self) -> String {
        let mut s = String::from("method,query,median_best_energy,fraction_won\n");
        for m in self.methods() {
            let runs: Vec<&WinRow> = self.wins.iter().filter(|w| w.method == m).collect();
            for &q in &self.checkpoints {
                let e: Vec<f64> = self
                    .curves
                    .iter()
                    .filter(|c| c.method == m && c.query == q)
                    .filter_map(|c| c.best_energy)
                    .collect();
                let won = runs
                    .iter()
                    .filter(|w| w.queries_to_win.is_some_and(|x| x <= q))
                    .count() as f64
                    / runs.len().max(1) as f64;
                let med = median(&e).map(|x| x.to_string()).unwrap_or_default();
                s.push_str(&format!("{m},{q},{med},{won}\n"));
            }
        }
        s
    }

    pub fn wins_csv(&self) -> String {
        let mut s = String::from("method,instance,seed,queries,queries_to_win,best_energy\n");
        for w in &self.wins {
            let q = w.queries_to_win.map(|x| x.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{q},{}\n",
                w.method, w.instance, w.seed, w.queries, w.best_energy
            ));
        }
        s
    }

    pub fn losses_csv(&self) -> String {
        let mut s = String::from("seed,fresh,pretrained\n");
        for l in &self.losses {
            s.push_str(&format!("{},{},{}\n", l.seed, l.fresh, l.pretrained));
        }
        s
    }
}

fn first_win(result: &SearchResult, ground: f64, epsilon: f64) -> Option<usize> {
    result
        .improvements
        .iter()
        .find(|i| i.energy - ground < epsilon)
        .map(|i| i.query)
}

fn curve(method: &str, instance: &str, seed: u64, r: &SearchResult, checkpoints: &[usize]) -> Vec<CurvePoint> {
    checkpoints
        .iter()
        .map(|&q| CurvePoint {
            method: method.into(),
            instance: instance.into(),
            seed,
            query: q,
            best_energy: r.best_after(q),
        })
        .collect()
}

pub fn run_efficiency(cfg: &ExperimentConfig) -> anyhow::Result<EfficiencyReport> {
    cfg.validate()?;
    let ec = &cfg.efficiency;
    let grid = cfg.grid.build()?;
    let t = *cfg
        .times
        .first()
        .ok_or_else(|| anyhow::anyhow!("efficiency needs one annealing time"))?;
    let train = load_pool(&ec.train, cfg.seed, "train")?;
    let test = load_pool(&ec.test, cfg.seed, "test")?;
    if train.is_empty() || test.is_empty() {
        anyhow::bail!("efficiency needs non-empty training and test pools");
    }

    let label = |inst: &crate::instances::NamedInstance, pool: &str| -> anyhow::Result<ScheduleParams> {
        let a = annealer(inst, t, cfg.dt)?;
        let c = MctsConfig {
            seed: cell_seed(cfg.seed, &format!("mcts-{pool}"), &inst.id, t),
            episodes: usize::MAX,
            query_budget: Some(ec.label_budget),
            ..cfg.mcts
        };
        Ok(ScheduleParams::new(run_search(&a, &grid, &c)?.result.x))
    };
    let train_labels = train
        .par_iter()
        .map(|i| label(i, "train"))
        .collect::<anyhow::Result<Vec<_>>>()?;

    // held-out samples for the loss comparison
    let test_labels = test
        .par_iter()
        .map(|i| label(i, "test"))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let solved: Vec<_> = test.iter().map(|i| &i.instance).zip(test_labels).collect();
    let held_out: Vec<TrainingSample> = build_pretrain_dataset(&solved, &grid)?
        .iter()
        .map(|s| s.to_training(&grid))
        .collect();
    let info_len = train[0].instance.num_vars() * train[0].instance.num_clauses();

    let seeds = ec.seeds.max(ec.loss_seeds) as u64;
    let nets: Vec<(u64, PolicyValueNet, PolicyValueNet)> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let init = substream(cfg.seed, "net-init", s);
            let fresh = PolicyValueNet::new(grid, info_len, &cfg.qzero.shape, cfg.qzero.lambda, init);
            let pre = pretrained_net(cfg, &grid, &train, &train_labels, init, substream(cfg.seed, "pretrain", s))?;
            Ok((s, fresh, pre))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let losses = nets
        .iter()
        .take(ec.loss_seeds)
        .map(|(s, fresh, pre)| {
            Ok(LossComparison {
                seed: *s,
                fresh: fresh.loss(&held_out)?.total(),
                pretrained: pre.loss(&held_out)?.total(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let qz_budget = cfg.qzero.solve.episode_budget * cfg.qzero.solve.playouts * grid.components();
    let jobs: Vec<(usize, usize)> = (0..test.len())
        .flat_map(|i| (0..ec.seeds).map(move |s| (i, s)))
        .collect();
    let results: Vec<(Vec<WinRow>, Vec<CurvePoint>)> = jobs
        .par_iter()
        .map(|&(i, s)| -> anyhow::Result<_> {
            let inst = &test[i];
            let a = annealer(inst, t, cfg.dt)?;
            let (_, fresh, pre) = &nets[s];
            let solve = QzConfig {
                seed: substream(cell_seed(cfg.seed, "qzero", &inst.id, t), "seed", s as u64),
                ..cfg.qzero.solve
            };
            let mut wins = Vec::new();
            let mut curves = Vec::new();
            for (method, net) in [("qzero-pre", pre), ("qzero-nopre", fresh)] {
                let out = qzero_solve(net, inst, &a, &grid, &solve)?;
                curves.extend(curve(method, &inst.id, s as u64, &out.result, &ec.checkpoints));
                wins.push(WinRow {
                    method: method.into(),
                    instance: inst.id.clone(),
                    seed: s as u64,
                    queries: out.ledger.count(),
                    queries_to_win: out.queries_to_win,
                    best_energy: out.result.energy,
                });
            }
            let mc = MctsConfig {
                seed: substream(cell_seed(cfg.seed, "mcts", &inst.id, t), "seed", s as u64),
                episodes: usize::MAX,
                query_budget: Some(qz_budget.min(ec.checkpoints.last().copied().unwrap_or(qz_budget))),
                target_energy: solve
                    .stop_on_win
                    .then(|| a.ground_energy() + solve.epsilon * (1.0 - 1e-9)),
                ..cfg.mcts
            };
            let out = run_search(&a, &grid, &mc)?;
            curves.extend(curve("mcts", &inst.id, s as u64, &out.result, &ec.checkpoints));
            wins.push(WinRow {
                method: "mcts".into(),
                instance: inst.id.clone(),
                seed: s as u64,
                queries: out.ledger.count(),
                queries_to_win: first_win(&out.result, a.ground_energy(), cfg.qzero.solve.epsilon),
                best_energy: out.result.energy,
            });
            Ok((wins, curves))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut wins = Vec::new();
    let mut curves = Vec::new();
    for (w, c) in results {
        wins.extend(w);
        curves.extend(c);
    }
    Ok(EfficiencyReport {
        curves,
        wins,
        losses,
        checkpoints: ec.checkpoints.clone(),
    })
}
