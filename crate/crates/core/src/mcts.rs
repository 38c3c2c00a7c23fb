//! Monte Carlo tree search over the coefficient tree.
//!
//! The tree has `M + 1` levels. The root carries no coefficient; a node at
//! level `k` fixes `x_k` to one grid value. Each episode runs four stages:
//!
//! 1. **Selection**: from the root, follow the child with the largest UCB
//!    score `w/v + C sqrt(2 ln v_parent / v)` while the current node has no
//!    untried candidates left.
//! 2. **Expansion**: add `N_exp` children drawn uniformly without
//!    replacement from the node's untried candidates.
//! 3. **Simulation**: for every new child, complete the path `N_sim` times
//!    with uniformly random coefficients and query the annealer once per
//!    completed path.
//! 4. **Backpropagation**: each playout adds one visit and its merit to the
//!    child and all of its ancestors.
//!
//! The search returns the best complete schedule ever evaluated, which is
//! tracked separately from the tree statistics.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{BestTracker, Objective, Outcome, QueryLedger, SearchResult};
use crate::rng::rng_from_seed;
use crate::schedule::ScheduleGrid;
use crate::{Error, Result};

/// How a query outcome becomes a merit in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Merit {
    /// `1 - E / scale`, with `scale` the objective's energy bound.
    #[default]
    NormalizedEnergy,
    /// The reported success probability. Requires an objective that knows
    /// the ground space.
    SuccessProbability,
}

/// `1 - energy / m`.
pub fn merit_of(energy: f64, scale: f64) -> f64 {
    1.0 - energy / scale
}

impl Merit {
    fn apply(self, outcome: &Outcome, scale: f64) -> Result<f64> {
        match self {
            Merit::NormalizedEnergy => Ok(merit_of(outcome.energy, scale)),
            Merit::SuccessProbability => outcome.success_probability.ok_or_else(|| {
                Error::InvalidConfig("objective does not report success probabilities".into())
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    /// Exploration constant `C`.
    pub exploration: f64,
    /// Children added per expansion, `N_exp`.
    pub expansion_width: usize,
    /// Playouts per new child, `N_sim`.
    pub playouts: usize,
    pub episodes: usize,
    #[serde(default)]
    pub merit: Merit,
    pub seed: u64,
    /// Stop before an episode would start with at least this many queries
    /// already spent.
    #[serde(default)]
    pub query_budget: Option<usize>,
    /// Stop as soon as an energy at or below this value is seen.
    #[serde(default)]
    pub target_energy: Option<f64>,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            exploration: 2.0,
            expansion_width: 10,
            playouts: 5,
            episodes: 40,
            merit: Merit::NormalizedEnergy,
            seed: 0,
            query_budget: None,
            target_energy: None,
        }
    }
}

impl MctsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.exploration > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "exploration constant must be positive, got {}",
                self.exploration
            )));
        }
        if self.expansion_width == 0 || self.playouts == 0 {
            return Err(Error::InvalidConfig(
                "expansion width and playouts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Tree node statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub level: usize,
    /// Grid index of this node's coefficient; `None` at the root.
    pub index: Option<usize>,
    pub parent: Option<usize>,
    pub visits: u64,
    pub merit_sum: f64,
    /// Mean merit of the playouts started from this node. Not used by the
    /// selection rule.
    pub direct_merit: f64,
    pub children: Vec<usize>,
    pub untried: Vec<usize>,
    /// Every leaf below this node has been created and evaluated.
    pub exhausted: bool,
}

/// `w/v + C sqrt(2 ln v_parent / v)`, `+inf` for unvisited nodes.
pub fn ucb_score(merit_sum: f64, visits: u64, parent_visits: f64, exploration: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    let v = visits as f64;
    merit_sum / v + exploration * (2.0 * parent_visits.ln() / v).sqrt()
}

/// Arena-allocated search tree.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    depth: usize,
}

impl SearchTree {
    pub fn new(grid: &ScheduleGrid) -> Self {
        SearchTree {
            nodes: vec![SearchNode {
                level: 0,
                index: None,
                parent: None,
                visits: 0,
                merit_sum: 0.0,
                direct_merit: 0.0,
                children: Vec::new(),
                untried: (0..grid.choices()).collect(),
                exhausted: false,
            }],
            depth: grid.components(),
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    /// Grid indices from the root down to `id`.
    pub fn path_indices(&self, mut id: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.nodes[id].level);
        while let Some(idx) = self.nodes[id].index {
            path.push(idx);
            id = self.nodes[id].parent.expect("non-root node has a parent");
        }
        path.reverse();
        path
    }

    fn select(&self, exploration: f64) -> usize {
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            if !node.untried.is_empty() || node.level == self.depth {
                return id;
            }
            let parent_visits = node.visits as f64;
            let mut best: Option<(f64, usize, usize)> = None;
            for &c in &node.children {
                let child = &self.nodes[c];
                if child.exhausted {
                    continue;
                }
                let score = ucb_score(child.merit_sum, child.visits, parent_visits, exploration);
                let idx = child.index.expect("child has an index");
                // ties go to the lowest coefficient index
                let take = match best {
                    None => true,
                    Some((s, i, _)) => score > s || (score == s && idx < i),
                };
                if take {
                    best = Some((score, idx, c));
                }
            }
            match best {
                Some((_, _, c)) => id = c,
                None => return id,
            }
        }
    }

    fn add_child(&mut self, parent: usize, index: usize, choices: usize) -> usize {
        let level = self.nodes[parent].level + 1;
        let id = self.nodes.len();
        let terminal = level == self.depth;
        self.nodes.push(SearchNode {
            level,
            index: Some(index),
            parent: Some(parent),
            visits: 0,
            merit_sum: 0.0,
            direct_merit: 0.0,
            children: Vec::new(),
            untried: if terminal { Vec::new() } else { (0..choices).collect() },
            exhausted: terminal,
        });
        self.nodes[parent].children.push(id);
        id
    }

    fn backpropagate(&mut self, mut id: usize, merit: f64) {
        loop {
            let node = &mut self.nodes[id];
            node.visits += 1;
            node.merit_sum += merit;
            match node.parent {
                Some(p) => id = p,
                None => break,
            }
        }
    }

    fn refresh_exhausted(&mut self, mut id: usize) {
        loop {
            let node = &self.nodes[id];
            let done = node.level == self.depth
                || (node.untried.is_empty()
                    && node.children.iter().all(|&c| self.nodes[c].exhausted));
            if !done {
                return;
            }
            self.nodes[id].exhausted = true;
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub best_energy_so_far: f64,
    pub queries_cumulative: usize,
    /// Grid indices of the node chosen for expansion.
    pub selected_path: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MctsOutcome {
    pub result: SearchResult,
    pub ledger: QueryLedger,
    pub episodes: Vec<EpisodeLog>,
    /// The whole tree was enumerated before the episode budget ran out.
    pub exhausted: bool,
    pub tree: SearchTree,
}

pub fn run_search(
    env: &dyn Objective,
    grid: &ScheduleGrid,
    config: &MctsConfig,
) -> Result<MctsOutcome> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let mut tree = SearchTree::new(grid);
    let mut ledger = QueryLedger::new();
    let mut best = BestTracker::default();
    let mut logs = Vec::new();
    let scale = env.energy_scale();
    let choices = grid.choices();
    let depth = grid.components();
    let mut path = vec![0usize; depth];

    'episodes: for episode in 0..config.episodes {
        if tree.root().exhausted {
            break;
        }
        if config.query_budget.is_some_and(|b| ledger.count() >= b) {
            break;
        }
        ledger.begin_episode();

        let leaf = tree.select(config.exploration);
        let prefix = tree.path_indices(leaf);

        let untried = &mut tree.nodes[leaf].untried;
        let take = config.expansion_width.min(untried.len());
        let mut picks: Vec<usize> = sample(&mut rng, untried.len(), take)
            .iter()
            .map(|i| untried[i])
            .collect();
        untried.retain(|i| !picks.contains(i));
        picks.sort_unstable();
        let new_children: Vec<usize> = picks
            .into_iter()
            .map(|idx| tree.add_child(leaf, idx, choices))
            .collect();

        for &child in &new_children {
            let level = tree.nodes[child].level;
            path[..prefix.len()].copy_from_slice(&prefix);
            path[prefix.len()] = tree.nodes[child].index.expect("child has an index");
            let mut own = 0.0;
            for _ in 0..config.playouts {
                for slot in &mut path[level..] {
                    *slot = rng.gen_range(0..choices);
                }
                let x = grid.params_from_indices(&path)?;
                let query = ledger.count() + 1;
                let outcome = env.evaluate(&x).map_err(|e| Error::Evaluation {
                    query,
                    source: Box::new(e),
                })?;
                ledger.record();
                best.observe(query, &path, &outcome);
                let merit = config.merit.apply(&outcome, scale)?;
                own += merit;
                tree.backpropagate(child, merit);
                if config
                    .target_energy
                    .is_some_and(|t| outcome.energy <= t)
                {
                    tree.nodes[child].direct_merit = own / config.playouts as f64;
                    tree.refresh_exhausted(child);
                    logs.push(EpisodeLog {
                        episode,
                        best_energy_so_far: best.energy().expect("evaluated"),
                        queries_cumulative: ledger.count(),
                        selected_path: prefix.clone(),
                    });
                    break 'episodes;
                }
            }
            tree.nodes[child].direct_merit = own / config.playouts as f64;
            tree.refresh_exhausted(child);
        }
        tree.refresh_exhausted(leaf);

        logs.push(EpisodeLog {
            episode,
            best_energy_so_far: best.energy().expect("at least one playout per episode"),
            queries_cumulative: ledger.count(),
            selected_path: prefix,
        });
    }

    let exhausted = tree.root().exhausted;
    Ok(MctsOutcome {
        result: best.finish(grid, ledger.count())?,
        ledger,
        episodes: logs,
        exhausted,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleParams;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ucb_examples() {
        assert_abs_diff_eq!(ucb_score(1.0, 1, 1.0, 2.0), 1.0, epsilon = 1e-15);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(ucb_score(0.5, 1, e, 2.0), 0.5 + 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(ucb_score(0.5, 1, e, 2.0), 3.3284, epsilon = 1e-4);
        assert_eq!(ucb_score(0.0, 0, 10.0, 2.0), f64::INFINITY);
        assert!(ucb_score(0.0, 0, 10.0, 2.0) > ucb_score(5.0, 5, 10.0, 2.0));
    }

    #[test]
    fn merit_examples() {
        assert_eq!(merit_of(0.0, 21.0), 1.0);
        assert_eq!(merit_of(21.0, 21.0), 0.0);
        assert_abs_diff_eq!(merit_of(0.125, 1.0), 0.875, epsilon = 1e-15);
    }

    fn quadratic(x: &ScheduleParams) -> Result<f64> {
        Ok(x.x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn one_episode_costs_fifty_queries() {
        let grid = ScheduleGrid::standard();
        let cfg = MctsConfig {
            episodes: 1,
            ..Default::default()
        };
        let out = run_search(&quadratic, &grid, &cfg).unwrap();
        assert_eq!(out.ledger.count(), 50);
        assert_eq!(out.ledger.per_episode(), &[50]);
        assert_eq!(out.tree.root().visits, 50);
        assert_eq!(out.tree.root().children.len(), 10);
    }

    #[test]
    fn finds_center_of_toy_bowl() {
        let grid = ScheduleGrid::new(2, 0.2, 0.1).unwrap();
        let cfg = MctsConfig {
            episodes: 50,
            expansion_width: 2,
            playouts: 2,
            ..Default::default()
        };
        let out = run_search(&quadratic, &grid, &cfg).unwrap();
        assert_eq!(out.result.indices, vec![2, 2]);
        assert!(out.result.energy < 1e-20);
    }

    #[test]
    fn single_level_matches_enumeration() {
        let grid = ScheduleGrid::new(1, 0.1, 0.1).unwrap();
        let f = |x: &ScheduleParams| -> Result<f64> { Ok((x.x[0] - 0.1).powi(2) + 0.3) };
        let cfg = MctsConfig {
            episodes: 10,
            ..Default::default()
        };
        let out = run_search(&f, &grid, &cfg).unwrap();
        assert_eq!(out.result.indices, vec![2]);
        assert!(out.exhausted);
    }

    #[test]
    fn tree_statistics_stay_consistent() {
        let grid = ScheduleGrid::new(3, 0.2, 0.05).unwrap();
        let cfg = MctsConfig {
            episodes: 30,
            expansion_width: 3,
            playouts: 2,
            seed: 9,
            ..Default::default()
        };
        let out = run_search(&quadratic, &grid, &cfg).unwrap();
        let tree = &out.tree;
        for (id, node) in tree.nodes().iter().enumerate() {
            let child_visits: u64 = node.children.iter().map(|&c| tree.node(c).visits).sum();
            let child_merit: f64 = node.children.iter().map(|&c| tree.node(c).merit_sum).sum();
            if id == 0 {
                assert_eq!(node.visits, child_visits);
            } else {
                // own playouts account for the remainder
                assert_eq!(node.visits - child_visits, cfg.playouts as u64);
                assert!((node.merit_sum - child_merit - node.direct_merit * cfg.playouts as f64).abs() < 1e-9);
            }
        }
        let children_made = tree.len() - 1;
        assert_eq!(out.ledger.count(), children_made * cfg.playouts);
        assert_eq!(tree.root().visits as usize, out.ledger.count());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let grid = ScheduleGrid::new(3, 0.2, 0.05).unwrap();
        let cfg = MctsConfig {
            episodes: 12,
            seed: 4,
            ..Default::default()
        };
        let a = run_search(&quadratic, &grid, &cfg).unwrap();
        let b = run_search(&quadratic, &grid, &cfg).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.result, b.result);
        assert_eq!(a.ledger, b.ledger);
    }

    #[test]
    fn budget_and_target_stop_early() {
        let grid = ScheduleGrid::standard();
        let cfg = MctsConfig {
            episodes: 100,
            query_budget: Some(120),
            ..Default::default()
        };
        let out = run_search(&quadratic, &grid, &cfg).unwrap();
        assert_eq!(out.ledger.count(), 150);
        let cfg = MctsConfig {
            episodes: 100,
            target_energy: Some(0.5),
            ..Default::default()
        };
        let out = run_search(&quadratic, &grid, &cfg).unwrap();
        assert_eq!(out.ledger.count(), 1);
    }

    #[test]
    fn evaluation_errors_carry_query_number() {
        let grid = ScheduleGrid::new(2, 0.2, 0.1).unwrap();
        let f = |_: &ScheduleParams| -> Result<f64> { Err(Error::InvalidConfig("boom".into())) };
        let err = run_search(&f, &grid, &MctsConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Evaluation { query: 1, .. }), "{err}");
    }

    #[test]
    fn success_merit_needs_fidelity() {
        let grid = ScheduleGrid::new(2, 0.2, 0.1).unwrap();
        let cfg = MctsConfig {
            merit: Merit::SuccessProbability,
            ..Default::default()
        };
        assert!(run_search(&quadratic, &grid, &cfg).is_err());
    }
}
