//! Alternate self-play and training on one instance until a win.
//!
//! Episodes run in rounds. After each round the networks take `epochs`
//! passes of minibatch descent over that round's samples. The exploration
//! constant falls linearly from `c_start` to `c_end` over the episode
//! budget and the learning rate falls geometrically from `lr_start` to
//! `lr_end` over the rounds.

use serde::{Deserialize, Serialize};

use super::network::{PolicyValueNet, TrainingSample};
use super::pretrain::pretrain;
use super::search::{self_play_episode, QzTask, SelfPlayConfig};
use crate::env::{BestTracker, QueryLedger, SearchResult};
use crate::rng::{rng_from_seed, substream};
use crate::schedule::ScheduleGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QzConfig {
    pub episodes_per_round: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Maximum number of self-play episodes.
    pub episode_budget: usize,
    /// `N_playout`.
    pub playouts: usize,
    pub c_start: f64,
    pub c_end: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Do not start an episode once this many queries are spent.
    #[serde(default)]
    pub query_budget: Option<usize>,
    /// End after the first episode that produces a win.
    pub stop_on_win: bool,
}

impl Default for QzConfig {
    fn default() -> Self {
        QzConfig {
            episodes_per_round: 4,
            epochs: 5,
            batch_size: 32,
            episode_budget: 200,
            playouts: 6,
            c_start: 3.0,
            c_end: 0.5,
            lr_start: 0.008,
            lr_end: 0.0008,
            epsilon: 0.01,
            seed: 0,
            query_budget: None,
            stop_on_win: true,
        }
    }
}

impl QzConfig {
    pub fn rounds(&self) -> usize {
        self.episode_budget.div_ceil(self.episodes_per_round.max(1))
    }

    /// Exploration constant of episode `e` (zero-based).
    pub fn exploration(&self, episode: usize) -> f64 {
        if self.episode_budget <= 1 {
            return self.c_start;
        }
        let f = episode.min(self.episode_budget - 1) as f64 / (self.episode_budget - 1) as f64;
        self.c_start + (self.c_end - self.c_start) * f
    }

    /// Learning rate of round `r` (zero-based).
    pub fn learning_rate(&self, round: usize) -> f64 {
        let rounds = self.rounds();
        if rounds <= 1 {
            return self.lr_start;
        }
        let f = round.min(rounds - 1) as f64 / (rounds - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(f)
    }

    fn validate(&self) -> Result<()> {
        if self.episodes_per_round == 0 || self.batch_size == 0 || self.playouts == 0 {
            return Err(Error::InvalidConfig(
                "episodes per round, batch size and playouts must be positive".into(),
            ));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub episodes: usize,
    pub wins: usize,
    pub exploration: f64,
    pub learning_rate: f64,
    /// Loss on the round's samples before and after training; absent when
    /// the networks were not trained this round.
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
    pub queries: usize,
    pub best_energy: f64,
}

#[derive(Debug, Clone)]
pub struct QzOutcome {
    pub result: SearchResult,
    pub won: bool,
    /// Cumulative queries when the first winning schedule was evaluated.
    pub queries_to_win: Option<usize>,
    pub ledger: QueryLedger,
    pub episodes: usize,
    pub rounds: Vec<RoundLog>,
    /// `C` used by every episode that ran.
    pub exploration: Vec<f64>,
}

impl QzOutcome {
    /// `false` when the budget ran out without a win.
    pub fn converged(&self) -> bool {
        self.won
    }

    pub fn rounds_csv(&self) -> String {
        let mut s = String::from(
            "round,episodes,wins,exploration,learning_rate,loss_before,loss_after,queries,best_energy\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for r in &self.rounds {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.round,
                r.episodes,
                r.wins,
                r.exploration,
                r.learning_rate,
                opt(r.loss_before),
                opt(r.loss_after),
                r.queries,
                r.best_energy
            ));
        }
        s
    }
}

/// Run self-play on `task`, training `net` between rounds when
/// `fine_tune` is set. Returns the best schedule seen; when no win is found
/// within the budget, [`QzOutcome::converged`] is `false`.
pub fn solve_instance(
    net: &mut PolicyValueNet,
    task: &QzTask,
    grid: &ScheduleGrid,
    config: &QzConfig,
    fine_tune: bool,
) -> Result<QzOutcome> {
    config.validate()?;
    if task.h_info.len() != net.info_len {
        return Err(Error::Shape(format!(
            "instance encoding has length {}, network expects {}",
            task.h_info.len(),
            net.info_len
        )));
    }
    let mut ledger = QueryLedger::new();
    let mut best = BestTracker::default();
    let mut queries_to_win = None;
    let mut rounds = Vec::new();
    let mut exploration = Vec::new();
    let mut episode = 0;

    'rounds: for round in 0..config.rounds() {
        let mut samples: Vec<TrainingSample> = Vec::new();
        let mut wins = 0;
        let mut ran = 0;
        let mut stop = false;
        let round_c = config.exploration(episode);
        while ran < config.episodes_per_round && episode < config.episode_budget {
            if config.query_budget.is_some_and(|b| ledger.count() >= b) {
                stop = true;
                break;
            }
            let c = config.exploration(episode);
            let sp = SelfPlayConfig {
                playouts: config.playouts,
                exploration: c,
                epsilon: config.epsilon,
            };
            let mut rng = rng_from_seed(substream(config.seed, "qzero-episode", episode as u64));
            let record = self_play_episode(net, task, grid, &sp, &mut rng)?;
            ledger.begin_episode();
            for q in &record.queries {
                ledger.record();
                best.observe(ledger.count(), &q.indices, &q.outcome);
                if queries_to_win.is_none() && task.is_win(q.outcome.energy, config.epsilon) {
                    queries_to_win = Some(ledger.count());
                }
            }
            exploration.push(c);
            samples.extend(record.samples());
            wins += usize::from(record.win);
            ran += 1;
            episode += 1;
            if config.stop_on_win && queries_to_win.is_some() {
                stop = true;
                break;
            }
        }
        if ran == 0 {
            break;
        }
        let lr = config.learning_rate(round);
        let (mut loss_before, mut loss_after) = (None, None);
        if fine_tune && !stop {
            loss_before = Some(net.loss(&samples)?.total());
            let seed = substream(config.seed, "qzero-train", round as u64);
            pretrain(net, &samples, config.epochs, config.batch_size, lr, seed)?;
            loss_after = Some(net.loss(&samples)?.total());
        }
        rounds.push(RoundLog {
            round,
            episodes: ran,
            wins,
            exploration: round_c,
            learning_rate: lr,
            loss_before,
            loss_after,
            queries: ledger.count(),
            best_energy: best.energy().unwrap_or(f64::NAN),
        });
        if stop {
            break 'rounds;
        }
    }

    Ok(QzOutcome {
        result: best.finish(grid, ledger.count())?,
        won: queries_to_win.is_some(),
        queries_to_win,
        ledger,
        episodes: episode,
        rounds,
        exploration,
    })
}
