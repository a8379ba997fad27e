//! Trains latency and energy predictors on a simulator-labelled dataset and
//! prints validation accuracy.
//!
//! Usage: `cargo run --release --example train_predictor -- [pack] [samples] [epochs] [hidden]`

use std::time::Instant;

use coforge::arch_graph::FeatureKind;
use coforge::cosim::generate_dataset;
use coforge::design_space::SpaceConfig;
use coforge::predictor::{dataset_fingerprint, prepare_samples, train, Hyperparams, Metric};
use coforge::profile::System;

fn main() -> coforge::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pack = args.first().map_or("tx2-gpu", String::as_str);
    let n: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(2000);
    let epochs: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(50);
    let hidden: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(32);

    let sys = System::builtin(pack)?;
    let data = generate_dataset(&SpaceConfig::default(), &sys, n, 42)?;
    let fp = dataset_fingerprint(&data.train);
    let hp = Hyperparams { hidden, epochs, learning_rate: 3e-3, ..Hyperparams::default() };
    for metric in [Metric::Latency, Metric::Energy] {
        for kind in [metric.features(), FeatureKind::OneHot] {
            let start = Instant::now();
            let tr = prepare_samples(&data.train, &sys, metric, kind)?;
            let va = prepare_samples(&data.val, &sys, metric, kind)?;
            let (_, report) = train(&tr, &va, metric, kind, &hp, fp.clone())?;
            let v = &report.val;
            println!(
                "{pack} {metric:?} {kind:?}: train mape {:.4} val mape {:.4} within10 {:.3} within20 {:.3} ranking {:.3} ({:.1}s)",
                report.train_mape,
                v.mape,
                v.within_10,
                v.within_20,
                v.ranking,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
