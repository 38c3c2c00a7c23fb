//! End-to-end use of the public API: instance files in, schedules and QAOA
//! angles out.

use std::sync::Arc;

use qzero_core::digitizer::{apply_digitized, digitize, export_qaoa, QaoaParams};
use qzero_core::dynamics::{final_energy, initial_state};
use qzero_core::mcts::{run_search, MctsConfig};
use qzero_core::qzero::{
    build_pretrain_dataset, pretrain, solve_instance, NetworkShape, PolicyValueNet, QzConfig,
    QzTask,
};
use qzero_core::sat::{
    brute_force_solve, build_h_info, emit_dimacs, generate_unique_instance, parse_dimacs,
    GeneratorOptions,
};
use qzero_core::schedule::{ScheduleFile, ScheduleGrid, ScheduleParams};
use qzero_core::sd::{sd_search, SdConfig};
use qzero_core::Annealer;

#[test]
fn dimacs_to_searched_schedule_to_qaoa() {
    let inst = generate_unique_instance(6, 18, 42, GeneratorOptions::default()).unwrap();
    let inst = parse_dimacs(&emit_dimacs(&inst)).unwrap();
    assert_eq!(brute_force_solve(&inst).unwrap().solutions.len(), 1);

    let grid = ScheduleGrid::standard();
    let a = Annealer::new(&inst, 20.0).unwrap();
    let cfg = MctsConfig {
        episodes: 6,
        seed: 3,
        ..Default::default()
    };
    let found = run_search(&a, &grid, &cfg).unwrap().result;
    let last = found.improvements.last().unwrap();
    assert_eq!(last.energy, found.energy);
    assert!(found.improvements.windows(2).all(|w| w[1].energy < w[0].energy));
    // the root takes all 41 children before selection descends:
    // 10 + 10 + 10 + 10 + 1, then 10 one level down, 5 playouts each
    assert_eq!(found.queries, 51 * 5);

    // the stored best replays exactly
    let replay = a.anneal(&ScheduleParams::new(found.x.clone())).unwrap();
    assert_eq!(replay.energy, found.energy);

    // schedule file and QAOA export
    let sched = a.schedule(&ScheduleParams::new(found.x.clone())).unwrap();
    let file = ScheduleFile::new(&grid, &sched);
    let text = serde_json::to_string(&file).unwrap();
    let (_, back) = serde_json::from_str::<ScheduleFile>(&text).unwrap().to_schedule().unwrap();
    let qaoa = export_qaoa(&digitize(&back, 1024).unwrap());
    let qaoa = QaoaParams::from_json(&qaoa.to_json().unwrap()).unwrap();
    assert_eq!(qaoa.depth, 1024);
    let dig = digitize(&back, 1024).unwrap();
    let psi = apply_digitized(&dig, a.h_final(), &initial_state(6).unwrap()).unwrap();
    assert!((final_energy(&psi, a.h_final()) - found.energy).abs() < 1e-2);
}

#[test]
fn sd_and_mcts_share_query_accounting() {
    let inst = generate_unique_instance(6, 18, 7, GeneratorOptions::default()).unwrap();
    let a = Annealer::new(&inst, 15.0).unwrap();
    let grid = ScheduleGrid::standard();
    let sd = sd_search(
        &a,
        &grid,
        &SdConfig {
            restarts: 4,
            query_budget: Some(120),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(sd.ledger.count() <= 120);
    assert_eq!(sd.result.queries, sd.ledger.count());
    assert_eq!(
        sd.restarts.iter().map(|r| r.queries).sum::<usize>(),
        sd.ledger.count()
    );
}

#[test]
fn pretrained_checkpoint_solves_after_reload() {
    let grid = ScheduleGrid::standard();
    let insts: Vec<_> = (0..3)
        .map(|s| generate_unique_instance(6, 18, 100 + s, GeneratorOptions::default()).unwrap())
        .collect();
    let labelled: Vec<_> = insts
        .iter()
        .map(|i| {
            let a = Annealer::new(i, 20.0).unwrap();
            let cfg = MctsConfig {
                episodes: 4,
                ..Default::default()
            };
            (i, ScheduleParams::new(run_search(&a, &grid, &cfg).unwrap().result.x))
        })
        .collect();
    let samples: Vec<_> = build_pretrain_dataset(&labelled, &grid)
        .unwrap()
        .iter()
        .map(|s| s.to_training(&grid))
        .collect();
    let shape = NetworkShape {
        policy_hidden: vec![32],
        value_hidden: vec![16],
        policy_outputs: None,
    };
    let mut net = PolicyValueNet::new(grid, 6 * 18, &shape, 1e-4, 9);
    let before = net.loss(&samples).unwrap().total();
    pretrain(&mut net, &samples, 50, 8, 0.01, 1).unwrap();
    assert!(net.loss(&samples).unwrap().total() < before);

    let mut buf = Vec::new();
    net.write_checkpoint(&mut buf).unwrap();
    let mut net = PolicyValueNet::read_checkpoint(buf.as_slice()).unwrap();

    let target = generate_unique_instance(6, 18, 555, GeneratorOptions::default()).unwrap();
    let a = Annealer::new(&target, 20.0).unwrap();
    let task = QzTask {
        objective: &a,
        ground_energy: a.ground_energy(),
        h_info: Arc::new(build_h_info(&target).to_vec()),
    };
    let cfg = QzConfig {
        episode_budget: 8,
        stop_on_win: false,
        ..Default::default()
    };
    let out = solve_instance(&mut net, &task, &grid, &cfg, true).unwrap();
    assert_eq!(out.episodes, 8);
    assert_eq!(out.result.queries, out.ledger.count());
    let replay = a.anneal(&ScheduleParams::new(out.result.x.clone())).unwrap();
    assert_eq!(replay.energy, out.result.energy);
}
