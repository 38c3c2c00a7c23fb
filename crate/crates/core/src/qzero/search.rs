//! PUCT tree search and self-play.
//!
//! Edges carry a visit count `N`, cumulative merit `W` and a prior `p`
//! from the policy network. Selection maximises
//!
//! ```text
//! U(s, a) = W(s, a) / N(s, a) + C p(s, a) sqrt(sum_b N(s, b)) / (1 + N(s, a))
//! ```
//!
//! with `0/0` read as `0`. A leaf is evaluated by the value network if the
//! schedule is partial and by one annealer query if it is complete; a
//! complete schedule wins when `E - E_g < epsilon` (merit `+1`) and loses
//! otherwise (merit `-1`).

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::network::{PolicyValueNet, QzState, TrainingSample};
use crate::env::{Objective, Outcome};
use crate::rng::Rng;
use crate::schedule::ScheduleGrid;
use crate::{Error, Result};

/// `W/N + C p sqrt(sum_N) / (1 + N)`, exploitation term `0` when `N = 0`.
pub fn puct_score(merit_sum: f64, visits: u32, prior: f64, total_visits: u32, exploration: f64) -> f64 {
    let exploit = if visits == 0 {
        0.0
    } else {
        merit_sum / f64::from(visits)
    };
    exploit + exploration * prior * f64::from(total_visits).sqrt() / (1.0 + f64::from(visits))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuctNode {
    /// Grid indices fixed on the path to this node.
    pub prefix: Vec<usize>,
    /// Per-action statistics, empty until the node is expanded.
    pub priors: Vec<f64>,
    pub visits: Vec<u32>,
    pub merit: Vec<f64>,
    pub children: Vec<Option<usize>>,
    /// Value-network estimate recorded at expansion.
    pub value: Option<f64>,
    /// Annealer result of a complete schedule, queried at most once.
    pub outcome: Option<Outcome>,
}

impl PuctNode {
    fn new(prefix: Vec<usize>) -> Self {
        PuctNode {
            prefix,
            priors: Vec::new(),
            visits: Vec::new(),
            merit: Vec::new(),
            children: Vec::new(),
            value: None,
            outcome: None,
        }
    }

    pub fn level(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_expanded(&self) -> bool {
        !self.priors.is_empty()
    }

    pub fn total_visits(&self) -> u32 {
        self.visits.iter().sum()
    }

    /// Highest score wins; ties go to the larger prior, then the lower index.
    pub fn select(&self, exploration: f64) -> usize {
        let total = self.total_visits();
        let mut best = 0;
        let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for a in 0..self.priors.len() {
            let key = (
                puct_score(self.merit[a], self.visits[a], self.priors[a], total, exploration),
                self.priors[a],
            );
            if key.0 > best_key.0 || (key.0 == best_key.0 && key.1 > best_key.1) {
                best = a;
                best_key = key;
            }
        }
        best
    }
}

/// The instance a search runs on.
pub struct QzTask<'a> {
    pub objective: &'a dyn Objective,
    pub ground_energy: f64,
    pub h_info: Arc<Vec<f64>>,
}

impl QzTask<'_> {
    pub fn is_win(&self, energy: f64, epsilon: f64) -> bool {
        energy - self.ground_energy < epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfPlayConfig {
    /// Guided simulations before each actual move.
    pub playouts: usize,
    /// `C` in the PUCT score.
    pub exploration: f64,
    /// Win threshold on `E - E_g`.
    pub epsilon: f64,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        SelfPlayConfig {
            playouts: 6,
            exploration: 3.0,
            epsilon: 0.01,
        }
    }
}

/// One annealer query made during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvent {
    pub indices: Vec<usize>,
    pub outcome: Outcome,
}

/// State and visit-frequency policy at one actual move.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub state: QzState,
    pub policy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: Vec<EpisodeStep>,
    /// `+1` for a win, `-1` otherwise; shared by every step.
    pub z: f64,
    pub win: bool,
    /// The schedule the actual moves arrived at.
    pub indices: Vec<usize>,
    pub outcome: Outcome,
    /// Queries in the order they were made.
    pub queries: Vec<QueryEvent>,
}

impl EpisodeRecord {
    pub fn samples(&self) -> Vec<TrainingSample> {
        self.steps
            .iter()
            .map(|s| TrainingSample {
                state: s.state.clone(),
                policy: s.policy.clone(),
                value: self.z,
            })
            .collect()
    }
}

/// Arena-backed PUCT tree.
#[derive(Debug, Clone)]
pub struct PuctTree {
    pub nodes: Vec<PuctNode>,
    pub root: usize,
}

impl Default for PuctTree {
    fn default() -> Self {
        Self::new()
    }
}

impl PuctTree {
    pub fn new() -> Self {
        PuctTree {
            nodes: vec![PuctNode::new(Vec::new())],
            root: 0,
        }
    }

    fn child(&mut self, node: usize, action: usize) -> usize {
        if let Some(c) = self.nodes[node].children[action] {
            return c;
        }
        let mut prefix = self.nodes[node].prefix.clone();
        prefix.push(action);
        self.nodes.push(PuctNode::new(prefix));
        let id = self.nodes.len() - 1;
        self.nodes[node].children[action] = Some(id);
        id
    }

    fn expand(&mut self, node: usize, net: &PolicyValueNet, task: &QzTask) -> Result<f64> {
        let state = QzState {
            prefix: self.nodes[node].prefix.clone(),
            h_info: Arc::clone(&task.h_info),
        };
        let (priors, v) = net.evaluate(&state)?;
        let n = &mut self.nodes[node];
        let p = priors.len();
        n.priors = priors;
        n.visits = vec![0; p];
        n.merit = vec![0.0; p];
        n.children = vec![None; p];
        n.value = Some(v);
        Ok(v)
    }

    fn terminal(
        &mut self,
        node: usize,
        task: &QzTask,
        grid: &ScheduleGrid,
        queries: &mut Vec<QueryEvent>,
    ) -> Result<Outcome> {
        if let Some(o) = self.nodes[node].outcome {
            return Ok(o);
        }
        let indices = self.nodes[node].prefix.clone();
        let x = grid.params_from_indices(&indices)?;
        let outcome = task.objective.evaluate(&x).map_err(|e| Error::Evaluation {
            query: queries.len() + 1,
            source: Box::new(e),
        })?;
        self.nodes[node].outcome = Some(outcome);
        queries.push(QueryEvent { indices, outcome });
        Ok(outcome)
    }

    /// One guided simulation from the current root.
    fn simulate(
        &mut self,
        net: &PolicyValueNet,
        task: &QzTask,
        grid: &ScheduleGrid,
        config: &SelfPlayConfig,
        queries: &mut Vec<QueryEvent>,
    ) -> Result<()> {
        let depth = grid.components();
        let mut path = Vec::new();
        let mut node = self.root;
        let merit = loop {
            if self.nodes[node].level() == depth {
                let o = self.terminal(node, task, grid, queries)?;
                break if task.is_win(o.energy, config.epsilon) { 1.0 } else { -1.0 };
            }
            if !self.nodes[node].is_expanded() {
                break self.expand(node, net, task)?;
            }
            let a = self.nodes[node].select(config.exploration);
            path.push((node, a));
            node = self.child(node, a);
        };
        for (n, a) in path {
            self.nodes[n].visits[a] += 1;
            self.nodes[n].merit[a] += merit;
        }
        Ok(())
    }
}

/// Play one episode of `M` actual moves. Each move runs
/// `config.playouts` simulations from the current root and then samples an
/// action from the root's visit frequencies; the subtree below the chosen
/// action is kept for the next move.
pub fn self_play_episode(
    net: &PolicyValueNet,
    task: &QzTask,
    grid: &ScheduleGrid,
    config: &SelfPlayConfig,
    rng: &mut Rng,
) -> Result<EpisodeRecord> {
    if config.playouts == 0 {
        return Err(Error::InvalidConfig("at least one playout per move".into()));
    }
    let depth = grid.components();
    let mut tree = PuctTree::new();
    let mut queries = Vec::new();
    let mut steps = Vec::with_capacity(depth);
    for _ in 0..depth {
        if !tree.nodes[tree.root].is_expanded() {
            tree.expand(tree.root, net, task)?;
        }
        for _ in 0..config.playouts {
            tree.simulate(net, task, grid, config, &mut queries)?;
        }
        let root = &tree.nodes[tree.root];
        let total = f64::from(root.total_visits());
        let policy: Vec<f64> = root.visits.iter().map(|&n| f64::from(n) / total).collect();
        let action = WeightedIndex::new(&policy)
            .map_err(|e| Error::InvalidConfig(format!("visit policy: {e}")))?
            .sample(rng);
        steps.push(EpisodeStep {
            state: QzState {
                prefix: root.prefix.clone(),
                h_info: Arc::clone(&task.h_info),
            },
            policy,
        });
        tree.root = tree.child(tree.root, action);
    }
    let leaf = tree.root;
    let outcome = tree.terminal(leaf, task, grid, &mut queries)?;
    let win = task.is_win(outcome.energy, config.epsilon);
    Ok(EpisodeRecord {
        steps,
        z: if win { 1.0 } else { -1.0 },
        win,
        indices: tree.nodes[leaf].prefix.clone(),
        outcome,
        queries,
    })
}
