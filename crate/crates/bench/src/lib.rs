//! Experiment harness for annealing-schedule search on 3-SAT.
//!
//! Each experiment reads an [`config::ExperimentConfig`], runs its cells on
//! the rayon pool, and writes CSV and JSON-lines results plus a plotting
//! script into the configured output directory.

pub mod config;
pub mod experiments;
pub mod instances;
pub mod plots;
pub mod table;

use std::path::Path;

use config::{ExperimentConfig, ExperimentKind};
use experiments::{DiagnosticsReport, EfficiencyReport, SweepReport, TransferReport};

/// What a finished run wrote and whether any cell failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<String>,
    pub failed_cells: usize,
    /// Human-readable headline numbers.
    pub notes: Vec<String>,
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<String>) -> anyhow::Result<()> {
    std::fs::write(dir.join(name), body)?;
    files.push(name.to_string());
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

pub fn write_sweep(dir: &Path, rep: &SweepReport, script: &str) -> anyhow::Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    rep.table.write(dir)?;
    let mut files = vec!["results.csv".into(), "results.jsonl".into(), "timings.csv".into()];
    write(dir, "summary.json", &serde_json::to_string_pretty(&rep.summary)?, &mut files)?;
    write(dir, "plot.py", script, &mut files)?;
    let notes = rep
        .summary
        .iter()
        .map(|s| {
            format!(
                "T={}: median success mcts {} sd {} (sd restart mean {}), linear mean {}",
                s.total_time,
                fmt(s.median_mcts),
                fmt(s.median_sd),
                fmt(s.mean_sd_restart),
                fmt(s.mean_linear)
            )
        })
        .collect();
    Ok(RunSummary {
        files,
        failed_cells: rep.table.failures(),
        notes,
    })
}

pub fn write_transfer(dir: &Path, rep: &TransferReport, bins: usize, times: &[f64]) -> anyhow::Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    rep.table.write(dir)?;
    let mut files = vec!["results.csv".into(), "results.jsonl".into(), "timings.csv".into()];
    write(dir, "histograms.csv", &rep.histograms_csv(bins), &mut files)?;
    write(dir, "pool_scores.json", &serde_json::to_string_pretty(&rep.pool_scores)?, &mut files)?;
    write(dir, "plot.py", plots::TRANSFER, &mut files)?;
    let notes = times
        .iter()
        .map(|&t| {
            format!(
                "T={t}: mean test success linear {} single {} average {} qzero {}",
                fmt(rep.mean_success("linear", t)),
                fmt(rep.mean_success("single", t)),
                fmt(rep.mean_success("average", t)),
                fmt(rep.mean_success("qzero", t))
            )
        })
        .collect();
    Ok(RunSummary {
        files,
        failed_cells: rep.table.failures(),
        notes,
    })
}

pub fn write_efficiency(dir: &Path, rep: &EfficiencyReport) -> anyhow::Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    write(dir, "curves.csv", &rep.curves_csv(), &mut files)?;
    write(dir, "medians.csv", &rep.medians_csv(), &mut files)?;
    write(dir, "wins.csv", &rep.wins_csv(), &mut files)?;
    write(dir, "losses.csv", &rep.losses_csv(), &mut files)?;
    let mut jsonl = String::new();
    for w in &rep.wins {
        jsonl.push_str(&serde_json::to_string(w)?);
        jsonl.push('\n');
    }
    write(dir, "wins.jsonl", &jsonl, &mut files)?;
    write(dir, "plot.py", plots::EFFICIENCY, &mut files)?;
    let mut notes: Vec<String> = rep
        .methods()
        .iter()
        .map(|m| format!("{m}: median queries to win {}", fmt(rep.median_queries_to_win(m))))
        .collect();
    let (fresh, pre) = rep.mean_loss();
    notes.push(format!("held-out loss: fresh {} pre-trained {}", fmt(fresh), fmt(pre)));
    Ok(RunSummary {
        files,
        failed_cells: 0,
        notes,
    })
}

pub fn write_diagnostics(dir: &Path, rep: &DiagnosticsReport) -> anyhow::Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    write(dir, "mingap.csv", &rep.gaps_csv(), &mut files)?;
    write(dir, "mingap_hist.csv", &rep.gap_histogram_csv(), &mut files)?;
    write(dir, "peaks.csv", &rep.peaks_csv(), &mut files)?;
    write(dir, "traces.csv", &rep.traces_csv(), &mut files)?;
    let mut jsonl = String::new();
    for p in &rep.peaks {
        jsonl.push_str(&serde_json::to_string(p)?);
        jsonl.push('\n');
    }
    write(dir, "peaks.jsonl", &jsonl, &mut files)?;
    write(dir, "plot.py", plots::DIAGNOSTICS, &mut files)?;
    let (w, n) = rep.qzero_vs_sd();
    Ok(RunSummary {
        files,
        failed_cells: 0,
        notes: vec![
            format!("median s at min gap {}", fmt(rep.median_gap_location())),
            format!("qzero peak excess <= sd on {w}/{n} instances"),
        ],
    })
}

/// Run the experiment named in `cfg` and write its outputs to `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> anyhow::Result<RunSummary> {
    let summary = match cfg.experiment {
        ExperimentKind::Sweep => write_sweep(dir, &experiments::run_sweep(cfg)?, plots::SWEEP)?,
        ExperimentKind::Compare => write_sweep(dir, &experiments::run_compare(cfg)?, plots::COMPARE)?,
        ExperimentKind::Transfer => {
            write_transfer(dir, &experiments::run_transfer(cfg)?, cfg.transfer.bins, &cfg.times)?
        }
        ExperimentKind::Efficiency => write_efficiency(dir, &experiments::run_efficiency(cfg)?)?,
        ExperimentKind::Diagnostics => write_diagnostics(dir, &experiments::run_diagnostics(cfg)?)?,
    };
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(summary)
}
