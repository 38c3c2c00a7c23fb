//! Declarative experiment configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use qzero_core::mcts::MctsConfig;
use qzero_core::qzero::{NetworkShape, QzConfig};
use qzero_core::schedule::ScheduleGrid;
use qzero_core::sd::SdConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sweep,
    Compare,
    Transfer,
    Efficiency,
    Diagnostics,
}

/// Where a pool of instances comes from: generated from seeds, or read
/// from DIMACS / JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    pub n: usize,
    pub m: usize,
    pub count: usize,
    /// Files take precedence over generation when non-empty.
    pub files: Vec<PathBuf>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            n: 7,
            m: 21,
            count: 5,
            files: Vec::new(),
        }
    }
}

impl PoolConfig {
    pub fn generated(n: usize, m: usize, count: usize) -> Self {
        PoolConfig {
            n,
            m,
            count,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub components: usize,
    pub bound: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            components: 5,
            bound: 0.2,
            step: 0.01,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> qzero_core::Result<ScheduleGrid> {
        ScheduleGrid::new(self.components, self.bound, self.step)
    }
}

/// QZero settings: the search loop plus network and pre-training knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QzSettings {
    pub solve: QzConfig,
    pub shape: NetworkShape,
    pub lambda: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_batch: usize,
}

impl Default for QzSettings {
    fn default() -> Self {
        QzSettings {
            solve: QzConfig::default(),
            shape: NetworkShape::default(),
            lambda: 1e-4,
            pretrain_epochs: 300,
            pretrain_lr: 0.008,
            pretrain_batch: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    pub train: PoolConfig,
    pub test: PoolConfig,
    /// Queries spent by MCTS on each training instance and on the pool.
    pub search_budget: usize,
    /// Bins of the success-probability histograms.
    pub bins: usize,
    /// Run the pre-trained QZero scenario.
    pub qzero: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            train: PoolConfig::generated(7, 21, 8),
            test: PoolConfig::generated(7, 21, 20),
            search_budget: 2000,
            bins: 20,
            qzero: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencyConfig {
    pub train: PoolConfig,
    pub test: PoolConfig,
    /// Paired seeds per test instance.
    pub seeds: usize,
    /// Seeds of the fresh-versus-pre-trained loss comparison.
    pub loss_seeds: usize,
    /// Queries MCTS spends on each training instance to produce labels.
    pub label_budget: usize,
    /// Query checkpoints of the median curves.
    pub checkpoints: Vec<usize>,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig {
            train: PoolConfig::generated(7, 21, 8),
            test: PoolConfig::generated(7, 21, 10),
            seeds: 5,
            loss_seeds: 10,
            label_budget: 2000,
            checkpoints: vec![50, 100, 200, 400, 800, 1200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// Intervals of the uniform `s` grid used for the spectral scan.
    pub spectral_points: usize,
    /// Rows kept per trace (every `stride`-th step).
    pub trace_stride: usize,
    pub histogram_bins: usize,
    /// Also trace schedules found by SD and QZero (costs searches).
    pub compare_searches: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            spectral_points: 100,
            trace_stride: 20,
            histogram_bins: 20,
            compare_searches: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Root of every named random substream.
    pub seed: u64,
    pub output: PathBuf,
    pub instances: PoolConfig,
    pub grid: GridConfig,
    pub times: Vec<f64>,
    pub dt: f64,
    /// Queries per optimiser and cell in budget-matched comparisons.
    pub budget: usize,
    pub mcts: MctsConfig,
    pub sd: SdConfig,
    pub qzero: QzSettings,
    pub transfer: TransferConfig,
    pub efficiency: EfficiencyConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Sweep,
            seed: 0,
            output: PathBuf::from("out"),
            instances: PoolConfig::default(),
            grid: GridConfig::default(),
            times: vec![25.0, 40.0, 60.0, 80.0, 100.0],
            dt: qzero_core::dynamics::DEFAULT_DT,
            budget: 4000,
            mcts: MctsConfig::default(),
            sd: SdConfig::default(),
            qzero: QzSettings::default(),
            transfer: TransferConfig::default(),
            efficiency: EfficiencyConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("parsing experiment config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative instance files resolve against the config's directory
        if let Some(dir) = path.parent() {
            for pool in [
                &mut cfg.instances,
                &mut cfg.transfer.train,
                &mut cfg.transfer.test,
                &mut cfg.efficiency.train,
                &mut cfg.efficiency.test,
            ] {
                for f in &mut pool.files {
                    if f.is_relative() {
                        *f = dir.join(&*f);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Fail early on anything a run could only discover halfway through.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.grid.build()?;
        if self.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            bail!("annealing times must be positive");
        }
        if !(self.dt > 0.0) {
            bail!("dt must be positive");
        }
        for pool in [
            &self.instances,
            &self.transfer.train,
            &self.transfer.test,
            &self.efficiency.train,
            &self.efficiency.test,
        ] {
            for f in &pool.files {
                if !f.exists() {
                    bail!("instance file {} does not exist", f.display());
                }
            }
        }
        Ok(())
    }
}
