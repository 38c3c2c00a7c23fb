//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs the desk-scale experiments, so expect tens of minutes in
//! release-grade test builds.
//!
//! `ACCEPTANCE_ONLY=3,9` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng as _;

use qzero_bench::config::{ExperimentConfig, PoolConfig};
use qzero_bench::experiments::{run_compare, run_diagnostics, run_efficiency, run_transfer};
use qzero_bench::table::median;
use qzero_core::digitizer::{apply_digitized, digitize};
use qzero_core::dynamics::{
    dense_hamiltonian, evolve, final_energy, initial_state, AnnealSpec, StateVector,
};
use qzero_core::mcts::{run_search, MctsConfig};
use qzero_core::qzero::{NetworkShape, PolicyValueNet, QzState, TrainingSample};
use qzero_core::rng::rng_from_seed;
use qzero_core::sat::{
    encode_hamiltonian, generate_unique_instance, Clause, GeneratorOptions, Literal, SatInstance,
};
use qzero_core::schedule::{Schedule, ScheduleGrid, ScheduleParams};
use qzero_core::sd::{sd_search, SdConfig};
use qzero_core::{Annealer, Outcome, Result as CoreResult};

type Check = anyhow::Result<(bool, String)>;

fn unique(n: usize, m: usize, seed: u64) -> SatInstance {
    generate_unique_instance(n, m, seed, GeneratorOptions::default()).unwrap()
}

fn distance(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn simulator() -> Check {
    let inst = unique(7, 21, 101);
    let h = encode_hamiltonian(&inst);
    let psi0 = initial_state(7)?;

    let sched = Schedule::new(ScheduleParams::new(vec![0.12, -0.08, 0.05, 0.0, -0.03]), 100.0)?;
    let (psi, _) = evolve(&AnnealSpec::new(&h, &sched), &psi0)?;
    let drift = (psi.norm() - 1.0).abs();

    // ground state of H(s) at a frozen s must only pick up a phase
    let s = 0.6;
    let eig = SymmetricEigen::new(dense_hamiltonian(&h, s));
    let k = eig.eigenvalues.imin();
    let v: Vec<Complex64> = eig.eigenvectors.column(k).iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let ground = StateVector::from_amplitudes(7, v)?;
    let frozen = Schedule::frozen(s, 5.0)?;
    let (after, _) = evolve(&AnnealSpec::new(&h, &frozen).with_dt(1e-3), &ground)?;
    let overlap = ground.inner(&after).norm();

    let short = Schedule::new(ScheduleParams::new(vec![0.12, -0.08, 0.05, 0.0, -0.03]), 10.0)?;
    let run = |dt: f64| evolve(&AnnealSpec::new(&h, &short).with_dt(dt), &psi0).map(|r| r.0);
    let reference = run(0.1 / 64.0)?;
    let ratio = distance(&run(0.1)?, &reference) / distance(&run(0.05)?, &reference);

    let ok = drift < 1e-9 && overlap > 1.0 - 1e-9 && (3.5..=4.5).contains(&ratio);
    Ok((
        ok,
        format!("norm drift {drift:.1e}, frozen |1-overlap| {:.1e}, dt ratio {ratio:.3}", (1.0 - overlap).abs()),
    ))
}

fn hamiltonian_oracle() -> Check {
    let mut rng = rng_from_seed(202);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.gen_range(3..=10);
        let m = rng.gen_range(1..=4 * n);
        let clauses: Vec<Clause> = (0..m)
            .map(|_| {
                let mut vars: Vec<usize> = Vec::new();
                while vars.len() < 3 {
                    let v = rng.gen_range(0..n);
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
                let lit = |v: usize, neg: bool| if neg { Literal::neg(v) } else { Literal::pos(v) };
                Clause::new(lit(vars[0], rng.gen()), lit(vars[1], rng.gen()), lit(vars[2], rng.gen()))
            })
            .collect();
        let inst = SatInstance::new(n, clauses.clone())?;
        let h = encode_hamiltonian(&inst);
        for z in 0..1usize << n {
            // variable 0 is the most significant bit
            let bit = |v: usize| (z >> (n - 1 - v)) & 1 == 1;
            let violated = clauses
                .iter()
                .filter(|c| c.literals().iter().all(|l| bit(l.var) == l.negated))
                .count();
            if h.violations()[z] as usize != violated {
                mismatches += 1;
            }
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatched assignments over 50 instances")))
}

fn adiabatic_limit() -> Check {
    let times = [25.0, 50.0, 100.0, 200.0, 400.0, 1000.0];
    let grid = ScheduleGrid::standard();
    let mut ok = true;
    let mut finals = Vec::new();
    let mut worst_drop: f64 = 0.0;
    for i in 0..5 {
        let inst = unique(7, 21, 300 + i);
        let p: Vec<f64> = times
            .iter()
            .map(|&t| Ok(Annealer::new(&inst, t)?.anneal(&grid.linear())?.success_probability))
            .collect::<CoreResult<_>>()?;
        for w in p.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        let last = *p.last().unwrap();
        ok &= last >= 0.99;
        finals.push(last);
    }
    ok &= worst_drop <= 0.02;
    let lo = finals.iter().copied().fold(1.0, f64::min);
    Ok((ok, format!("min success at T=1000 {lo:.4}, largest drop along T {worst_drop:.4}")))
}

fn mcts_exhaustive() -> Check {
    let grid = ScheduleGrid::new(2, 0.05, 0.01)?;
    let p = grid.choices();
    let mut hits = 0;
    for trial in 0..100u64 {
        let mut rng = rng_from_seed(400 + trial);
        let table: Vec<f64> = (0..p * p).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lookup = |x: &ScheduleParams| -> CoreResult<Outcome> {
            let a = grid.index_of(x.x[0])?;
            let b = grid.index_of(x.x[1])?;
            Ok(Outcome {
                energy: table[a * p + b],
                success_probability: None,
            })
        };
        let objective = |x: &ScheduleParams| -> CoreResult<f64> { Ok(lookup(x)?.energy) };
        let best = (0..p * p).min_by(|&a, &b| table[a].total_cmp(&table[b])).unwrap();
        let cfg = MctsConfig {
            episodes: 100_000,
            seed: trial,
            ..Default::default()
        };
        let out = run_search(&objective, &grid, &cfg)?;
        if out.result.indices == [best / p, best % p] {
            hits += 1;
        }
    }
    Ok((hits == 100, format!("{hits}/100 trials found the brute-force argmin of {} leaves", p * p)))
}

fn mcts_vs_sd() -> Check {
    let cfg = ExperimentConfig {
        instances: PoolConfig::generated(7, 21, 10),
        times: vec![60.0],
        budget: 4000,
        seed: 5,
        ..Default::default()
    };
    let rep = run_compare(&cfg)?;
    let s = &rep.summary[0];
    let (m, d) = (s.median_mcts.unwrap_or(f64::NAN), s.median_sd.unwrap_or(f64::NAN));
    let ok = rep.table.failures() == 0 && s.max_budget_mismatch <= 0.1 && m >= d - 0.02;
    Ok((
        ok,
        format!(
            "median success MCTS {m:.4} vs SD {d:.4}, budget mismatch {:.3}, failed cells {}",
            s.max_budget_mismatch,
            rep.table.failures()
        ),
    ))
}

fn gradient_check() -> Check {
    let grid = ScheduleGrid::new(3, 0.2, 0.1)?;
    let p = grid.choices();
    let shape = NetworkShape {
        policy_hidden: vec![7, 5],
        value_hidden: vec![6, 4],
        policy_outputs: None,
    };
    let mut rng = rng_from_seed(606);
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let mut net = PolicyValueNet::new(grid, 6, &shape, 1e-3, 700 + trial);
        for w in net.params_mut() {
            *w += rng.gen_range(-0.3..0.3);
        }
        let batch: Vec<TrainingSample> = (0..5)
            .map(|i| {
                let mut pi: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
                let total: f64 = pi.iter().sum();
                pi.iter_mut().for_each(|v| *v /= total);
                TrainingSample {
                    state: QzState {
                        prefix: (0..i % 3).map(|_| rng.gen_range(0..p)).collect(),
                        h_info: Arc::new((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()),
                    },
                    policy: pi,
                    value: rng.gen_range(-1.0..1.0),
                }
            })
            .collect();
        let analytic = net.gradient(&batch)?.flat();
        let h = 1e-6;
        let mut diff = 0.0;
        for (i, a) in analytic.iter().enumerate() {
            let orig = *net.params_mut().nth(i).unwrap();
            *net.params_mut().nth(i).unwrap() = orig + h;
            let up = net.loss(&batch)?.total();
            *net.params_mut().nth(i).unwrap() = orig - h;
            let down = net.loss(&batch)?.total();
            *net.params_mut().nth(i).unwrap() = orig;
            diff += (a - (up - down) / (2.0 * h)).powi(2);
        }
        let rel = diff.sqrt() / analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(rel);
        passed += usize::from(rel < 1e-4);
    }
    Ok((passed == 20, format!("{passed}/20 trials, worst relative error {worst:.1e}")))
}

fn pretraining() -> Check {
    let cfg = ExperimentConfig {
        times: vec![80.0],
        seed: 7,
        ..Default::default()
    };
    let rep = run_efficiency(&cfg)?;
    let (fresh, pre) = rep.mean_loss();
    let (fresh, pre) = (fresh.unwrap_or(f64::NAN), pre.unwrap_or(f64::NAN));
    let seeds_better = rep.losses.iter().filter(|l| l.pretrained < l.fresh).count();
    let key = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    let q_pre = rep.median_queries_to_win("qzero-pre");
    let q_nopre = rep.median_queries_to_win("qzero-nopre");
    let wins = |m: &str| rep.queries_to_win(m).iter().filter(|q| q.is_some()).count();
    let ok = pre < fresh && key(q_pre) <= key(q_nopre) && q_pre.is_some();
    let fmt = |v: Option<f64>| v.map_or("none".into(), |x| format!("{x}"));
    Ok((
        ok,
        format!(
            "(a) initial loss pre {pre:.3} < fresh {fresh:.3} on {seeds_better}/{} seeds; \
             (b) median queries-to-win pre {} vs nopre {} (wins {}/{} vs {}/{})",
            rep.losses.len(),
            fmt(q_pre),
            fmt(q_nopre),
            wins("qzero-pre"),
            rep.queries_to_win("qzero-pre").len(),
            wins("qzero-nopre"),
            rep.queries_to_win("qzero-nopre").len(),
        ),
    ))
}

fn transfer_ordering() -> Check {
    let cfg = ExperimentConfig {
        times: vec![60.0],
        seed: 8,
        ..Default::default()
    };
    let rep = run_transfer(&cfg)?;
    let get = |s: &str| rep.mean_success(s, 60.0).unwrap_or(f64::NAN);
    let (lin, single, avg, qz) = (get("linear"), get("single"), get("average"), get("qzero"));
    let ok = rep.table.failures() == 0 && single >= lin - 0.02 && avg >= single - 0.02;
    Ok((
        ok,
        format!("mean test success linear {lin:.4}, single {single:.4}, average {avg:.4} (qzero {qz:.4})"),
    ))
}

fn digitization() -> Check {
    let inst = unique(7, 21, 909);
    let h = encode_hamiltonian(&inst);
    let psi0 = initial_state(7)?;
    let sched = Schedule::linear(40.0)?;
    let (cont, _) = evolve(&AnnealSpec::new(&h, &sched).with_dt(40.0 / 65536.0), &psi0)?;
    let e_cont = final_energy(&cont, &h);
    let mut errors = Vec::new();
    let mut k = 64;
    while k <= 2048 {
        let psi = apply_digitized(&digitize(&sched, k)?, &h, &psi0)?;
        errors.push((k, (final_energy(&psi, &h) - e_cont).abs()));
        k *= 2;
    }
    let monotone = errors.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 < 1e-10);
    let last = errors.last().unwrap().1;
    let listing: Vec<String> = errors.iter().map(|(k, e)| format!("K={k}:{e:.1e}")).collect();
    Ok((last < 1e-3 && monotone, listing.join(" ")))
}

fn min_gap() -> Check {
    let mut cfg = ExperimentConfig {
        instances: PoolConfig::generated(7, 21, 20),
        times: vec![60.0],
        seed: 10,
        ..Default::default()
    };
    cfg.diagnostics.compare_searches = false;
    let rep = run_diagnostics(&cfg)?;
    let loc = rep.median_gap_location().unwrap_or(f64::NAN);
    Ok((
        (0.45..=0.75).contains(&loc),
        format!("median s at min gap {loc:.3} over {} instances", rep.gaps.len()),
    ))
}

fn query_accounting() -> Check {
    let grid = ScheduleGrid::standard();
    let inst = unique(7, 21, 1111);
    let a = Annealer::new(&inst, 60.0)?;
    let one = MctsConfig {
        episodes: 1,
        ..Default::default()
    };
    let out = run_search(&a, &grid, &one)?;
    let per_episode = out.ledger.per_episode().to_vec();

    let mut counts = Vec::new();
    for i in 0..10 {
        let a = Annealer::new(&unique(7, 21, 1200 + i), 60.0)?;
        for seed in 0..5 {
            let sd = sd_search(&a, &grid, &SdConfig { seed, ..Default::default() })?;
            counts.push(sd.restarts[0].queries as f64);
        }
    }
    let med = median(&counts).unwrap_or(f64::NAN);
    let ok = out.ledger.count() == 50 && per_episode == [50] && (50.0..=200.0).contains(&med);
    Ok((
        ok,
        format!(
            "one MCTS episode {} queries; SD single-restart median {med} (range {}..{})",
            out.ledger.count(),
            counts.iter().copied().fold(f64::INFINITY, f64::min),
            counts.iter().copied().fold(0.0, f64::max)
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: Vec<(u32, &str, fn() -> Check)> = vec![
        (1, "simulator correctness", simulator),
        (2, "Hamiltonian oracle equivalence", hamiltonian_oracle),
        (3, "adiabatic limit", adiabatic_limit),
        (4, "MCTS exhaustive-limit optimality", mcts_exhaustive),
        (5, "MCTS vs SD at matched budget", mcts_vs_sd),
        (6, "QZero gradient check", gradient_check),
        (7, "pre-training transfer", pretraining),
        (8, "transfer ordering", transfer_ordering),
        (9, "digitization", digitization),
        (10, "min-gap location", min_gap),
        (11, "query accounting", query_accounting),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
