//! Stochastic descent: greedy local search over single-coordinate grid
//! moves, restarted from random points.
//!
//! From a random start, the neighbours `x ± delta e_i` (those inside the
//! grid) are examined and a strictly better one is accepted; a restart ends
//! when no neighbour improves or after `max_iters` accepted moves. Points
//! already evaluated within a restart are remembered and not queried again.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{BestTracker, Objective, QueryLedger, SearchResult};
use crate::rng::rng_from_seed;
use crate::schedule::ScheduleGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborOrder {
    #[default]
    Randomized,
    Sequential,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// Move to the first strictly better neighbour found.
    #[default]
    FirstImprovement,
    /// Evaluate all neighbours, move to the best if it improves.
    BestImprovement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdConfig {
    /// Accepted moves per restart before giving up.
    pub max_iters: usize,
    pub restarts: usize,
    #[serde(default)]
    pub order: NeighborOrder,
    #[serde(default)]
    pub acceptance: Acceptance,
    pub seed: u64,
    /// Hard cap on the total number of queries across restarts.
    #[serde(default)]
    pub query_budget: Option<usize>,
}

impl Default for SdConfig {
    fn default() -> Self {
        SdConfig {
            max_iters: 10_000,
            restarts: 1,
            order: NeighborOrder::Randomized,
            acceptance: Acceptance::FirstImprovement,
            seed: 0,
            query_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartLog {
    pub restart: usize,
    pub start: Vec<usize>,
    pub end: Vec<usize>,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_probability: Option<f64>,
    pub queries: usize,
    pub moves: usize,
    /// Energies of the accepted points, starting point first.
    pub accepted: Vec<f64>,
    /// Stopped because no neighbour improved (rather than a cap).
    pub local_minimum: bool,
}

#[derive(Debug, Clone)]
pub struct SdOutcome {
    pub result: SearchResult,
    pub ledger: QueryLedger,
    pub restarts: Vec<RestartLog>,
}

enum Stop {
    Budget,
}

pub fn sd_search(env: &dyn Objective, grid: &ScheduleGrid, config: &SdConfig) -> Result<SdOutcome> {
    if config.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut ledger = QueryLedger::new();
    let mut best = BestTracker::default();
    let mut logs = Vec::new();
    let dims = grid.components();
    let choices = grid.choices();

    for restart in 0..config.restarts {
        if config.query_budget.is_some_and(|b| ledger.count() >= b) {
            break;
        }
        ledger.begin_episode();
        let before = ledger.count();
        let mut memo: HashMap<Vec<usize>, (f64, Option<f64>)> = HashMap::new();

        let mut query = |point: &[usize],
                         ledger: &mut QueryLedger,
                         best: &mut BestTracker|
         -> Result<std::result::Result<(f64, Option<f64>), Stop>> {
            if let Some(&v) = memo.get(point) {
                return Ok(Ok(v));
            }
            if config.query_budget.is_some_and(|b| ledger.count() >= b) {
                return Ok(Err(Stop::Budget));
            }
            let x = grid.params_from_indices(point)?;
            let q = ledger.count() + 1;
            let outcome = env.evaluate(&x).map_err(|e| Error::Evaluation {
                query: q,
                source: Box::new(e),
            })?;
            ledger.record();
            best.observe(q, point, &outcome);
            let v = (outcome.energy, outcome.success_probability);
            memo.insert(point.to_vec(), v);
            Ok(Ok(v))
        };

        let start: Vec<usize> = (0..dims).map(|_| rng.gen_range(0..choices)).collect();
        let mut current = start.clone();
        let (mut energy, mut success) = match query(&current, &mut ledger, &mut best)? {
            Ok(v) => v,
            Err(Stop::Budget) => break,
        };
        let mut accepted = vec![energy];
        let mut moves = 0;
        let mut local_minimum = false;
        let mut budget_hit = false;

        let mut moves_list: Vec<(usize, bool)> =
            (0..dims).flat_map(|d| [(d, false), (d, true)]).collect();

        'descent: while moves < config.max_iters {
            if config.order == NeighborOrder::Randomized {
                moves_list.shuffle(&mut rng);
            }
            let mut chosen: Option<(Vec<usize>, f64, Option<f64>)> = None;
            for &(d, up) in &moves_list {
                let mut cand = current.clone();
                if up {
                    if cand[d] + 1 >= choices {
                        continue;
                    }
                    cand[d] += 1;
                } else {
                    if cand[d] == 0 {
                        continue;
                    }
                    cand[d] -= 1;
                }
                let (e, p) = match query(&cand, &mut ledger, &mut best)? {
                    Ok(v) => v,
                    Err(Stop::Budget) => {
                        budget_hit = true;
                        break;
                    }
                };
                let improves = e < chosen.as_ref().map_or(energy, |c| c.1);
                if improves {
                    chosen = Some((cand, e, p));
                    if config.acceptance == Acceptance::FirstImprovement {
                        break;
                    }
                }
            }
            match chosen {
                Some((cand, e, p)) if !budget_hit || config.acceptance == Acceptance::FirstImprovement => {
                    current = cand;
                    energy = e;
                    success = p;
                    accepted.push(e);
                    moves += 1;
                }
                _ => {
                    local_minimum = !budget_hit;
                    break 'descent;
                }
            }
            if budget_hit {
                break;
            }
        }

        logs.push(RestartLog {
            restart,
            start,
            end: current,
            energy,
            success_probability: success,
            queries: ledger.count() - before,
            moves,
            accepted,
            local_minimum,
        });
        if budget_hit {
            break;
        }
    }

    Ok(SdOutcome {
        result: best.finish(grid, ledger.count())?,
        ledger,
        restarts: logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleParams;

    fn bowl(x: &ScheduleParams) -> Result<f64> {
        Ok(x.x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn convex_bowl_reaches_center_from_any_start() {
        let grid = ScheduleGrid::new(3, 0.2, 0.02).unwrap();
        for seed in 0..10 {
            let cfg = SdConfig {
                seed,
                ..Default::default()
            };
            let out = sd_search(&bowl, &grid, &cfg).unwrap();
            assert_eq!(out.result.indices, vec![10, 10, 10]);
            assert!(out.restarts[0].local_minimum);
        }
    }

    #[test]
    fn two_basins_trap_the_descent() {
        // 1-D landscape over 21 points: shallow well at index 4, deep well at 16
        let grid = ScheduleGrid::new(1, 1.0, 0.1).unwrap();
        let landscape = |i: usize| -> f64 {
            let i = i as f64;
            ((i - 4.0).abs() + 1.0).min((i - 16.0).abs())
        };
        let f = move |x: &ScheduleParams| -> Result<f64> {
            Ok(landscape(grid.index_of(x.x[0]).unwrap()))
        };
        // enumerate the landscape to find the start that sits in the shallow basin
        let minima: Vec<usize> = (0..21)
            .filter(|&i| {
                let l = if i > 0 { landscape(i - 1) } else { f64::INFINITY };
                let r = if i < 20 { landscape(i + 1) } else { f64::INFINITY };
                landscape(i) < l && landscape(i) < r
            })
            .collect();
        assert_eq!(minima, vec![4, 16]);
        let mut trapped = 0;
        for seed in 0..50 {
            let cfg = SdConfig {
                seed,
                ..Default::default()
            };
            let out = sd_search(&f, &grid, &cfg).unwrap();
            let start = out.restarts[0].start[0];
            // oracle: in this landscape every point has at most one strictly
            // lower neighbour, so the descent path is unique
            let mut expect = start;
            loop {
                let lower: Vec<usize> = [expect.wrapping_sub(1), expect + 1]
                    .into_iter()
                    .filter(|&j| j < 21 && landscape(j) < landscape(expect))
                    .collect();
                assert!(lower.len() <= 1);
                match lower.first() {
                    Some(&j) => expect = j,
                    None => break,
                }
            }
            assert_eq!(out.result.indices[0], expect, "start {start}");
            if expect == 4 {
                trapped += 1;
                assert_eq!(out.result.energy, 1.0);
            }
        }
        assert!(trapped > 0);
    }

    #[test]
    fn accepted_energies_strictly_decrease_and_end_locally_optimal() {
        let grid = ScheduleGrid::new(4, 0.2, 0.02).unwrap();
        let wobbly = |x: &ScheduleParams| -> Result<f64> {
            Ok(x.x.iter().enumerate().map(|(i, v)| (v * (7.0 + i as f64) * 10.0).sin() + v * v).sum())
        };
        for seed in 0..10 {
            let cfg = SdConfig {
                seed,
                restarts: 3,
                ..Default::default()
            };
            let out = sd_search(&wobbly, &grid, &cfg).unwrap();
            for r in &out.restarts {
                assert!(r.accepted.windows(2).all(|w| w[1] < w[0]));
                assert!(r.local_minimum);
                for d in 0..4 {
                    for delta in [-1i64, 1] {
                        let j = r.end[d] as i64 + delta;
                        if !(0..grid.choices() as i64).contains(&j) {
                            continue;
                        }
                        let mut nb = r.end.clone();
                        nb[d] = j as usize;
                        let e = wobbly(&grid.params_from_indices(&nb).unwrap()).unwrap();
                        assert!(e >= r.energy);
                    }
                }
            }
            let per: usize = out.restarts.iter().map(|r| r.queries).sum();
            assert_eq!(per, out.ledger.count());
        }
    }

    #[test]
    fn budget_is_a_hard_cap() {
        let grid = ScheduleGrid::standard();
        let cfg = SdConfig {
            restarts: 1000,
            query_budget: Some(333),
            ..Default::default()
        };
        let out = sd_search(&bowl, &grid, &cfg).unwrap();
        assert_eq!(out.ledger.count(), 333);
        assert_eq!(out.result.queries, 333);
    }

    #[test]
    fn best_improvement_and_sequential_modes() {
        let grid = ScheduleGrid::new(3, 0.2, 0.02).unwrap();
        for (order, acceptance) in [
            (NeighborOrder::Sequential, Acceptance::FirstImprovement),
            (NeighborOrder::Randomized, Acceptance::BestImprovement),
        ] {
            let cfg = SdConfig {
                order,
                acceptance,
                ..Default::default()
            };
            let out = sd_search(&bowl, &grid, &cfg).unwrap();
            assert_eq!(out.result.indices, vec![10, 10, 10]);
        }
    }

    #[test]
    fn max_iters_caps_moves() {
        let grid = ScheduleGrid::new(2, 0.2, 0.01).unwrap();
        let cfg = SdConfig {
            max_iters: 2,
            seed: 1,
            ..Default::default()
        };
        let out = sd_search(&bowl, &grid, &cfg).unwrap();
        assert!(out.restarts[0].moves <= 2);
        assert!(!out.restarts[0].local_minimum);
        assert!(sd_search(&bowl, &grid, &SdConfig { max_iters: 0, ..cfg }).is_err());
    }
}
