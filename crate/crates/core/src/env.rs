//! The evaluation environment: a simulated annealer that turns schedule
//! coefficients into a final energy, and the ledger that counts its uses.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, AnnealSpec, StateVector};
use crate::sat::{brute_force_solve, encode_hamiltonian, DiagonalHamiltonian, SatInstance};
use crate::schedule::{Schedule, ScheduleParams};
use crate::Result;

/// Something that scores complete coefficient vectors; lower energy is
/// better. One call is one query of the annealer.
pub trait Objective: Sync {
    fn evaluate(&self, x: &ScheduleParams) -> Result<Outcome>;

    /// Upper bound of the energy scale, used to normalise merits.
    fn energy_scale(&self) -> f64 {
        1.0
    }

    fn energy(&self, x: &ScheduleParams) -> Result<f64> {
        Ok(self.evaluate(x)?.energy)
    }
}

/// Result of one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub energy: f64,
    /// Overlap with the known ground space, when the objective knows it.
    pub success_probability: Option<f64>,
}

impl<F> Objective for F
where
    F: Fn(&ScheduleParams) -> Result<f64> + Sync,
{
    fn evaluate(&self, x: &ScheduleParams) -> Result<Outcome> {
        Ok(Outcome {
            energy: self(x)?,
            success_probability: None,
        })
    }
}

/// Energy and fidelity of one simulated anneal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub energy: f64,
    pub success_probability: f64,
}

/// A simulated quantum annealer for one 3-SAT instance at fixed `T`.
#[derive(Debug, Clone)]
pub struct Annealer {
    h_final: DiagonalHamiltonian,
    solutions: Vec<usize>,
    ground_energy: f64,
    clauses: usize,
    total_time: f64,
    dt: f64,
    clamp: bool,
}

impl Annealer {
    pub fn new(inst: &SatInstance, total_time: f64) -> Result<Self> {
        let solved = brute_force_solve(inst)?;
        Ok(Annealer {
            h_final: encode_hamiltonian(inst),
            solutions: solved.solutions,
            ground_energy: f64::from(solved.ground_energy),
            clauses: inst.num_clauses(),
            total_time,
            dt: dynamics::DEFAULT_DT,
            clamp: true,
        })
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn h_final(&self) -> &DiagonalHamiltonian {
        &self.h_final
    }

    pub fn solutions(&self) -> &[usize] {
        &self.solutions
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn schedule(&self, x: &ScheduleParams) -> Result<Schedule> {
        Ok(Schedule::new(x.clone(), self.total_time)?.with_clamp(self.clamp))
    }

    pub fn final_state(&self, x: &ScheduleParams) -> Result<StateVector> {
        let schedule = self.schedule(x)?;
        let spec = AnnealSpec::new(&self.h_final, &schedule).with_dt(self.dt);
        let psi0 = StateVector::uniform(self.h_final.num_qubits())?;
        Ok(dynamics::evolve(&spec, &psi0)?.0)
    }

    pub fn anneal(&self, x: &ScheduleParams) -> Result<Evaluation> {
        let psi = self.final_state(x)?;
        Ok(Evaluation {
            energy: dynamics::final_energy(&psi, &self.h_final),
            success_probability: dynamics::success_probability(&psi, &self.solutions),
        })
    }
}

impl Objective for Annealer {
    fn evaluate(&self, x: &ScheduleParams) -> Result<Outcome> {
        let ev = self.anneal(x)?;
        Ok(Outcome {
            energy: ev.energy,
            success_probability: Some(ev.success_probability),
        })
    }

    fn energy_scale(&self) -> f64 {
        self.clauses as f64
    }
}

/// Mean energy of one schedule over a pool of annealers.
pub struct PoolObjective<'a> {
    pub annealers: &'a [Annealer],
}

impl Objective for PoolObjective<'_> {
    fn evaluate(&self, x: &ScheduleParams) -> Result<Outcome> {
        let (mut energy, mut success) = (0.0, 0.0);
        for a in self.annealers {
            let ev = a.anneal(x)?;
            energy += ev.energy;
            success += ev.success_probability;
        }
        let k = self.annealers.len() as f64;
        Ok(Outcome {
            energy: energy / k,
            success_probability: Some(success / k),
        })
    }

    fn energy_scale(&self) -> f64 {
        self.annealers
            .iter()
            .map(Objective::energy_scale)
            .fold(1.0, f64::max)
    }
}

/// Count of annealer queries, split by episode (or restart).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    count: usize,
    per_episode: Vec<usize>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn per_episode(&self) -> &[usize] {
        &self.per_episode
    }

    pub fn begin_episode(&mut self) {
        self.per_episode.push(0);
    }

    pub fn record(&mut self) {
        self.count += 1;
        match self.per_episode.last_mut() {
            Some(c) => *c += 1,
            None => self.per_episode.push(1),
        }
    }

    /// Append another ledger's episodes after this one's.
    pub fn merge(&mut self, other: &QueryLedger) {
        self.count += other.count;
        self.per_episode.extend_from_slice(&other.per_episode);
    }
}

/// Point where the best-so-far energy improved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    /// Cumulative query count at which this energy was first seen.
    pub query: usize,
    pub energy: f64,
}

/// Best complete schedule seen by a search, shared by every optimiser so
/// that results and query accounting line up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub indices: Vec<usize>,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_probability: Option<f64>,
    pub queries: usize,
    pub improvements: Vec<Improvement>,
}

impl SearchResult {
    /// Queries spent before the best-so-far energy first dropped to
    /// `target` or below.
    pub fn queries_to_reach(&self, target: f64) -> Option<usize> {
        self.improvements
            .iter()
            .find(|imp| imp.energy <= target)
            .map(|imp| imp.query)
    }

    /// Best-so-far energy after `queries` queries (`None` before the first).
    pub fn best_after(&self, queries: usize) -> Option<f64> {
        self.improvements
            .iter()
            .take_while(|imp| imp.query <= queries)
            .last()
            .map(|imp| imp.energy)
    }
}

/// Running argmin over evaluated schedules.
#[derive(Debug, Clone, Default)]
pub(crate) struct BestTracker {
    best: Option<(f64, Option<f64>, Vec<usize>)>,
    improvements: Vec<Improvement>,
}

impl BestTracker {
    pub(crate) fn observe(&mut self, query: usize, indices: &[usize], outcome: &Outcome) -> bool {
        let better = match &self.best {
            None => true,
            Some((e, _, _)) => outcome.energy < *e,
        };
        if better {
            self.best = Some((outcome.energy, outcome.success_probability, indices.to_vec()));
            self.improvements.push(Improvement {
                query,
                energy: outcome.energy,
            });
        }
        better
    }

    pub(crate) fn energy(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.0)
    }

    pub(crate) fn finish(
        self,
        grid: &crate::schedule::ScheduleGrid,
        queries: usize,
    ) -> Result<SearchResult> {
        let (energy, success_probability, indices) = self.best.ok_or_else(|| {
            crate::Error::InvalidConfig("search finished without evaluating anything".into())
        })?;
        Ok(SearchResult {
            x: grid.params_from_indices(&indices)?.x,
            indices,
            energy,
            success_probability,
            queries,
            improvements: self.improvements,
        })
    }
}
