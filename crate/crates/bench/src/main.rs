use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use qzero_bench::config::{ExperimentConfig, ExperimentKind, PoolConfig};
use qzero_bench::instances::{load_pool, read_instance, write_pool};
use qzero_core::digitizer::{digitize, export_qaoa};
use qzero_core::schedule::{Schedule, ScheduleFile, ScheduleParams};
use qzero_core::Annealer;

#[derive(Parser)]
#[command(name = "qzero-bench", about = "Annealing-schedule search experiments on 3-SAT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pool of uniquely satisfiable instances as DIMACS and JSON.
    Gen {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, default_value_t = 21)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "pool")]
        pool: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run whatever experiment the configuration names.
    Run(RunArgs),
    /// Success probability against T for linear, MCTS and SD.
    Sweep(RunArgs),
    /// Budget-matched MCTS versus SD.
    Compare(RunArgs),
    /// Train-pool schedules applied to a held-out pool.
    Transfer(RunArgs),
    /// Queries to a win with and without pre-training.
    Efficiency(RunArgs),
    /// Minimum gaps and excess-energy traces.
    Diagnose(RunArgs),
    /// Evaluate one schedule on one instance.
    Anneal {
        #[arg(long)]
        instance: PathBuf,
        /// Schedule JSON file; the linear schedule when omitted.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Annealing time, required without a schedule file.
        #[arg(long = "T")]
        total_time: Option<f64>,
        #[arg(long, default_value_t = qzero_core::dynamics::DEFAULT_DT)]
        dt: f64,
    },
    /// Slice a schedule into QAOA angles.
    Digitize {
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long = "T")]
        total_time: Option<f64>,
        /// Number of slices (QAOA depth).
        #[arg(long = "K")]
        slices: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_schedule(path: Option<&PathBuf>, total_time: Option<f64>) -> anyhow::Result<Schedule> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file: ScheduleFile = serde_json::from_str(&text)?;
            Ok(file.to_schedule()?.1)
        }
        None => {
            let t = total_time.context("--T is required without --schedule")?;
            Ok(Schedule::linear(t)?)
        }
    }
}

fn run(args: RunArgs, kind: Option<ExperimentKind>) -> anyhow::Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = kind {
        cfg.experiment = k;
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let summary = qzero_bench::run_experiment(&cfg, &cfg.output)?;
    for note in &summary.notes {
        println!("{note}");
    }
    println!("wrote {} files to {}", summary.files.len() + 1, cfg.output.display());
    if summary.failed_cells > 0 {
        eprintln!("{} cells failed", summary.failed_cells);
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Gen { n, m, count, seed, pool, out } => {
            let insts = load_pool(&PoolConfig::generated(n, m, count), seed, &pool)?;
            write_pool(&out, &insts)?;
            println!("wrote {count} instances to {}", out.display());
        }
        Command::Run(a) => return run(a, None),
        Command::Sweep(a) => return run(a, Some(ExperimentKind::Sweep)),
        Command::Compare(a) => return run(a, Some(ExperimentKind::Compare)),
        Command::Transfer(a) => return run(a, Some(ExperimentKind::Transfer)),
        Command::Efficiency(a) => return run(a, Some(ExperimentKind::Efficiency)),
        Command::Diagnose(a) => return run(a, Some(ExperimentKind::Diagnostics)),
        Command::Anneal { instance, schedule, total_time, dt } => {
            let inst = read_instance(&instance)?;
            let s = load_schedule(schedule.as_ref(), total_time)?;
            let a = Annealer::new(&inst.instance, s.total_time())?.with_dt(dt);
            let ev = a.anneal(&ScheduleParams::new(s.params().x.clone()))?;
            println!(
                "{}",
                serde_json::json!({
                    "instance": inst.id,
                    "T": s.total_time(),
                    "energy": ev.energy,
                    "success_probability": ev.success_probability,
                })
            );
        }
        Command::Digitize { schedule, total_time, slices, out } => {
            let s = load_schedule(schedule.as_ref(), total_time)?;
            let json = export_qaoa(&digitize(&s, slices)?).to_json()?;
            match out {
                Some(p) => std::fs::write(&p, json)?,
                None => println!("{json}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
