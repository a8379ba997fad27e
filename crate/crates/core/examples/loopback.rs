//! Runs a split architecture across an edge server and a device client on
//! loopback, throttled to a slow link, and checks the outputs against a
//! single-process run.
//!
//! Usage: `cargo run --release --example loopback -- [mbps] [batches]`

use std::net::TcpListener;
use std::thread;

use coforge::design_space::{Aggr, Architecture, InputShape, Layer};
use coforge::runtime::{run_device, run_local, serve_listener, tensor_digest, DeploymentDescriptor, EdgeConfig, RunConfig};

fn main() -> coforge::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mbps: f64 = args.first().and_then(|v| v.parse().ok()).unwrap_or(20.0);
    let batches: u32 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(16);
    let bps = mbps * 1e6;

    let arch = Architecture::new(
        vec![
            Layer::Sample { k: 10 },
            Layer::Aggregate { aggr: Aggr::Max },
            Layer::Combine { out_dim: 64 },
            Layer::Communicate,
            Layer::Sample { k: 10 },
            Layer::Aggregate { aggr: Aggr::Max },
            Layer::Combine { out_dim: 128 },
            Layer::GlobalPooling,
            Layer::Combine { out_dim: 40 },
        ],
        InputShape(512, 3),
    )?;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let edge_cfg = EdgeConfig { throttle_bps: Some(bps), max_sessions: Some(2), ..EdgeConfig::default() };
    let edge = thread::spawn(move || serve_listener(&listener, &edge_cfg));

    let mut reports = Vec::new();
    for depth in [1, 2] {
        let cfg = RunConfig { pipeline_depth: depth, throttle_bps: Some(bps), ..RunConfig::default() };
        let r = run_device(addr, &arch, batches, &cfg)?;
        println!(
            "depth {depth}: {:.2} inferences/s, mean latency {:.1} ms, {} B sent, {} B received, compression {:.2}",
            r.throughput_ips,
            r.mean_latency_s * 1e3,
            r.bytes_sent,
            r.bytes_received,
            r.compression_ratio
        );
        reports.push((cfg, r));
    }
    edge.join().expect("edge thread")?;

    let (cfg, r) = &reports[1];
    let desc = DeploymentDescriptor::new(&arch, cfg.codec, cfg.weight_seed, cfg.test_mode)?;
    let mismatches = r
        .batches
        .iter()
        .filter(|b| tensor_digest(&run_local(&desc, cfg.input_seed, b.batch_id).expect("local run")) != b.output_digest)
        .count();
    println!("{mismatches} of {} outputs differ from the single-process run", r.batches.len());
    Ok(())
}
