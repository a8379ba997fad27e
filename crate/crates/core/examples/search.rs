//! Two-stage architecture-mapping search on the simulator.
//!
//! Stage 1 draws valid architectures at random and keeps the best
//! constraint-satisfying ones; stage 2 scales down their functions while the
//! accuracy loss stays within budget.
//!
//! Usage: `cargo run --release --example search -- [pack] [trials] [tuning_iters]`

use coforge::design_space::SpaceConfig;
use coforge::profile::System;
use coforge::search::{stage1_operation_search, stage2_function_tuning, Evaluator, SearchConfig, SyntheticOracle};

fn main() -> coforge::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pack = args.first().map_or("tx2-gpu", String::as_str);
    let trials = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(1000);
    let tuning_iters = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(50);

    let sys = System::builtin(pack)?;
    let space = SpaceConfig::default();
    let cfg = SearchConfig { trials, tuning_iters, seed: 7, ..SearchConfig::for_system(&sys.config) };
    let out = stage1_operation_search(&space, &sys, &cfg, Evaluator::Simulator, &SyntheticOracle)?;
    println!(
        "stage 1: {} evaluated, {} invalid and {} duplicate draws skipped",
        out.evaluated, out.invalid_draws, out.duplicate_draws
    );
    if out.infeasible() {
        println!(
            "no architecture met the constraints; fastest seen {:.2} ms, lowest energy {:.2} mJ",
            out.min_latency_seen * 1e3,
            out.min_energy_seen * 1e3
        );
        return Ok(());
    }
    let (tuned, log) = stage2_function_tuning(&out.section, &space, &sys, &cfg, &SyntheticOracle)?;
    let accepted = log.iter().filter(|r| r.accepted).count();
    println!("stage 2: {accepted}/{} scale-downs accepted", log.len());

    for (label, section) in [("after stage 1", &out.section), ("after stage 2", &tuned)] {
        let best = section.best().expect("non-empty section");
        println!(
            "{label}: score {:.4}, accuracy {:.4}, {:.2} ms, {:.2} mJ\n  {}",
            best.score,
            best.accuracy,
            best.latency_s * 1e3,
            best.energy_j * 1e3,
            best.arch.layers.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
        );
    }
    Ok(())
}
