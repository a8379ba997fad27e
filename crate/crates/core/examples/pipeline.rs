//! Throughput of a split architecture when several batches are in flight.

use coforge::cosim::{simulate, simulate_pipeline};
use coforge::design_space::{Aggr, Architecture, InputShape, Layer};
use coforge::profile::System;

fn main() -> coforge::Result<()> {
    let arch = Architecture::new(
        vec![
            Layer::Sample { k: 20 },
            Layer::Aggregate { aggr: Aggr::Max },
            Layer::Combine { out_dim: 64 },
            Layer::Communicate,
            Layer::Sample { k: 20 },
            Layer::Aggregate { aggr: Aggr::Max },
            Layer::Combine { out_dim: 128 },
            Layer::GlobalPooling,
            Layer::Combine { out_dim: 40 },
        ],
        InputShape(1024, 3),
    )?;
    let sys = System::builtin("tx2-gpu")?;
    let single = simulate(&arch, &sys)?;
    println!("single inference: {:.2} ms", single.latency_s * 1e3);

    let batches = 32;
    for depth in [Some(1), Some(2), Some(4), None] {
        let r = simulate_pipeline(&arch, &sys, batches, depth)?;
        let label = depth.map_or("unbounded".to_string(), |d| format!("depth {d}"));
        println!("{label:>10}: {:7.2} inferences/s, makespan {:.1} ms", r.throughput_ips, r.makespan_s * 1e3);
    }

    let r = simulate_pipeline(&arch, &sys, 3, Some(2))?;
    println!("\nschedule of three batches at depth 2:");
    for (b, stages) in r.schedule.iter().enumerate() {
        for (stage, (start, end)) in r.stages.iter().zip(stages) {
            println!("  batch {b} {:<9?} {:7.2} .. {:7.2} ms", stage.resource, start * 1e3, end * 1e3);
        }
    }
    Ok(())
}
