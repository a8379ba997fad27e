//! Builds an architecture zoo at two bandwidths and dispatches from it as the
//! link degrades and recovers.

use coforge::design_space::SpaceConfig;
use coforge::profile::System;
use coforge::search::{dispatch, stage1_operation_search, ArchitectureZoo, Evaluator, SearchConfig, SyntheticOracle};

fn main() -> coforge::Result<()> {
    let base = System::builtin("tx2-gpu")?;
    let space = SpaceConfig::default();
    let mut zoo = ArchitectureZoo::default();
    for mbps in [10.0, 40.0] {
        let sys = base.with_config(base.config.clone().with_bandwidth(mbps * 1e6))?;
        let cfg = SearchConfig { trials: 600, seed: 1, ..SearchConfig::for_system(&sys.config) };
        let out = stage1_operation_search(&space, &sys, &cfg, Evaluator::Simulator, &SyntheticOracle)?;
        println!("{mbps:>4} Mbps search kept {} candidates", out.section.entries().len());
        zoo.append(sys.config.fingerprint(), out.section);
    }

    for mbps in [40.0, 20.0, 10.0, 5.0, 40.0] {
        let sys = base.with_config(base.config.clone().with_bandwidth(mbps * 1e6))?;
        let pick = dispatch(&zoo, &sys)?;
        let edge_layers = pick.mapping.sides.iter().filter(|s| **s == coforge::design_space::Side::Edge).count();
        println!(
            "{mbps:>4} Mbps -> {} ({} of {} layers on the edge), {:.2} ms, score {:.4}{}",
            pick.hash,
            edge_layers,
            pick.arch.len(),
            pick.latency_s * 1e3,
            pick.score,
            if pick.feasible { "" } else { " (nothing feasible, fastest entry)" }
        );
    }
    Ok(())
}
