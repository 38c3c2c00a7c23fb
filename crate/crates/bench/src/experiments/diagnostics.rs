//! Spectral and excess-energy diagnostics.
//!
//! For each instance: the minimum gap of `H(s)` along the path, and the
//! excess energy `<H(s(t))> - E_0(s(t))` over time for the linear schedule
//! and, optionally, for schedules found by SD and by QZero.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qzero_core::dynamics::{evolve, initial_state, spectrum_scan, uniform_s_grid, AnnealSpec, EvolutionTrace, TraceOptions};
use qzero_core::qzero::{solve_instance, PolicyValueNet, QzConfig, QzTask};
use qzero_core::sat::build_h_info;
use qzero_core::schedule::ScheduleParams;
use qzero_core::sd::{sd_search, SdConfig};
use qzero_core::Annealer;

use super::{annealer, cell_seed};
use crate::config::ExperimentConfig;
use crate::instances::load_pool;
use crate::table::{histogram, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinGapRow {
    pub instance: String,
    pub min_gap: f64,
    pub s_at_min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub instance: String,
    pub schedule: String,
    pub peak_excess: f64,
    pub initial_excess: f64,
    pub final_energy: f64,
    pub success_probability: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub gaps: Vec<MinGapRow>,
    pub peaks: Vec<PeakRow>,
    /// `(instance, schedule, trace)`.
    pub traces: Vec<(String, String, EvolutionTrace)>,
    pub bins: usize,
}

impl DiagnosticsReport {
    pub fn median_gap_location(&self) -> Option<f64> {
        median(&self.gaps.iter().map(|g| g.s_at_min_gap).collect::<Vec<_>>())
    }

    /// Instances where QZero's peak excess energy is at most SD's, out of
    /// the instances where both were traced.
    pub fn qzero_vs_sd(&self) -> (usize, usize) {
        let mut wins = 0;
        let mut total = 0;
        for g in &self.gaps {
            let peak = |name: &str| {
                self.peaks
                    .iter()
                    .find(|p| p.instance == g.instance && p.schedule == name)
                    .map(|p| p.peak_excess)
            };
            if let (Some(q), Some(s)) = (peak("qzero"), peak("sd")) {
                total += 1;
                wins += usize::from(q <= s);
            }
        }
        (wins, total)
    }

    pub fn gaps_csv(&self) -> String {
        let mut s = String::from("instance,min_gap,s_at_min_gap\n");
        for g in &self.gaps {
            s.push_str(&format!("{},{},{}\n", g.instance, g.min_gap, g.s_at_min_gap));
        }
        s
    }

    pub fn gap_histogram_csv(&self) -> String {
        let locs: Vec<f64> = self.gaps.iter().map(|g| g.s_at_min_gap).collect();
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (b, c) in histogram(&locs, self.bins).iter().enumerate() {
            s.push_str(&format!(
                "{},{},{c}\n",
                b as f64 / self.bins as f64,
                (b + 1) as f64 / self.bins as f64
            ));
        }
        s
    }

    pub fn peaks_csv(&self) -> String {
        let mut s = String::from("instance,schedule,peak_excess,initial_excess,final_energy,success_probability\n");
        for p in &self.peaks {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.instance, p.schedule, p.peak_excess, p.initial_excess, p.final_energy, p.success_probability
            ));
        }
        s
    }

    pub fn traces_csv(&self) -> String {
        let mut s = String::from("instance,schedule,t,s,energy,e0,excess\n");
        for (inst, name, tr) in &self.traces {
            for p in &tr.points {
                let e0 = p.ground_energy.map(|x| x.to_string()).unwrap_or_default();
                let ex = p.excess_energy().map(|x| x.to_string()).unwrap_or_default();
                s.push_str(&format!("{inst},{name},{},{},{},{e0},{ex}\n", p.t, p.s, p.energy));
            }
        }
        s
    }
}

fn trace(a: &Annealer, x: &ScheduleParams, stride: usize, dt: f64) -> anyhow::Result<(EvolutionTrace, f64)> {
    let schedule = a.schedule(x)?;
    let spec = AnnealSpec::new(a.h_final(), &schedule)
        .with_dt(dt)
        .with_trace(TraceOptions {
            stride: stride.max(1),
            spectral: true,
        });
    let psi0 = initial_state(a.h_final().num_qubits())?;
    let (_, tr) = evolve(&spec, &psi0)?;
    let ev = a.anneal(x)?;
    Ok((tr, ev.success_probability))
}

pub fn run_diagnostics(cfg: &ExperimentConfig) -> anyhow::Result<DiagnosticsReport> {
    cfg.validate()?;
    let dc = &cfg.diagnostics;
    let grid = cfg.grid.build()?;
    let t = *cfg
        .times
        .first()
        .ok_or_else(|| anyhow::anyhow!("diagnostics needs one annealing time"))?;
    let pool = load_pool(&cfg.instances, cfg.seed, "diag")?;
    let s_grid = uniform_s_grid(dc.spectral_points);

    type Cell = (MinGapRow, Vec<PeakRow>, Vec<(String, String, EvolutionTrace)>);
    let cells: Vec<Cell> = pool
        .par_iter()
        .map(|inst| -> anyhow::Result<Cell> {
            let a = annealer(inst, t, cfg.dt)?;
            let scan = spectrum_scan(a.h_final(), &s_grid)?;
            let gap = MinGapRow {
                instance: inst.id.clone(),
                min_gap: scan.min_gap,
                s_at_min_gap: scan.s_at_min_gap,
            };
            let mut schedules = vec![("linear".to_string(), grid.linear())];
            if dc.compare_searches {
                let sd = sd_search(
                    &a,
                    &grid,
                    &SdConfig {
                        seed: cell_seed(cfg.seed, "sd", &inst.id, t),
                        restarts: usize::MAX,
                        query_budget: Some(cfg.budget),
                        ..cfg.sd
                    },
                )?;
                schedules.push(("sd".into(), ScheduleParams::new(sd.result.x)));
                let info = build_h_info(&inst.instance).to_vec();
                let mut net = PolicyValueNet::new(
                    grid,
                    info.len(),
                    &cfg.qzero.shape,
                    cfg.qzero.lambda,
                    cell_seed(cfg.seed, "net-init", &inst.id, t),
                );
                let task = QzTask {
                    objective: &a,
                    ground_energy: a.ground_energy(),
                    h_info: Arc::new(info),
                };
                let solve = QzConfig {
                    seed: cell_seed(cfg.seed, "qzero", &inst.id, t),
                    ..cfg.qzero.solve
                };
                let out = solve_instance(&mut net, &task, &grid, &solve, true)?;
                schedules.push(("qzero".into(), ScheduleParams::new(out.result.x)));
            }
            let mut peaks = Vec::new();
            let mut traces = Vec::new();
            for (name, x) in schedules {
                let (tr, success) = trace(&a, &x, dc.trace_stride, cfg.dt)?;
                let excess: Vec<f64> = tr.points.iter().filter_map(|p| p.excess_energy()).collect();
                peaks.push(PeakRow {
                    instance: inst.id.clone(),
                    schedule: name.clone(),
                    peak_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    initial_excess: excess.first().copied().unwrap_or(f64::NAN),
                    final_energy: tr.points.last().map_or(f64::NAN, |p| p.energy),
                    success_probability: success,
                    x: x.x.clone(),
                });
                traces.push((inst.id.clone(), name, tr));
            }
            Ok((gap, peaks, traces))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut report = DiagnosticsReport {
        gaps: Vec::new(),
        peaks: Vec::new(),
        traces: Vec::new(),
        bins: dc.histogram_bins.max(1),
    };
    for (g, p, tr) in cells {
        report.gaps.push(g);
        report.peaks.extend(p);
        report.traces.extend(tr);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PoolConfig;

    #[test]
    fn excess_energy_starts_at_zero() {
        let mut cfg = ExperimentConfig {
            instances: PoolConfig::generated(5, 15, 2),
            times: vec![6.0],
            budget: 40,
            ..Default::default()
        };
        cfg.diagnostics.spectral_points = 20;
        cfg.qzero.shape.policy_hidden = vec![8];
        cfg.qzero.shape.value_hidden = vec![8];
        cfg.qzero.solve.episode_budget = 4;
        let rep = run_diagnostics(&cfg).unwrap();
        assert_eq!(rep.gaps.len(), 2);
        assert_eq!(rep.peaks.len(), 6);
        for p in &rep.peaks {
            assert!(p.initial_excess.abs() < 1e-9, "{p:?}");
            assert!(p.peak_excess >= 0.0);
        }
        let (_, total) = rep.qzero_vs_sd();
        assert_eq!(total, 2);
        for g in &rep.gaps {
            assert!(g.min_gap > 0.0 && (0.0..=1.0).contains(&g.s_at_min_gap));
        }
        assert!(rep.traces_csv().lines().count() > 6);
    }
}
