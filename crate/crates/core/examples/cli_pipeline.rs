//! Drives the whole command-line workflow in a scratch workspace: profile,
//! dataset, predictors, search, a loopback deployment and the final report.

use std::net::TcpListener;
use std::thread;

use coforge::cli::run_from;
use coforge::runtime::{serve_listener, EdgeConfig};

fn main() -> coforge::Result<()> {
    let dir = tempfile::tempdir()?;
    let ws = dir.path().to_str().expect("utf-8 temp path").to_string();
    let cli = |args: &[&str]| {
        let mut full = vec!["coforge", "--workspace", &ws, "--seed", "42"];
        full.extend_from_slice(args);
        println!("$ coforge {}", args.join(" "));
        run_from(full)
    };
    cli(&["profile", "--profile", "tx2-gpu"])?;
    cli(&["gen-data", "--samples", "1500"])?;
    cli(&["train-pred", "--epochs", "30"])?;
    cli(&["search", "--evaluator", "predictor", "--trials", "500", "--tuning-iters", "20"])?;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    let edge = thread::spawn(move || serve_listener(&listener, &EdgeConfig { max_sessions: Some(1), ..EdgeConfig::default() }));
    cli(&["run-device", "--edge", &addr, "--batches", "8"])?;
    edge.join().expect("edge thread")?;

    let report = dir.path().join("report.md");
    cli(&["report", "--out", report.to_str().expect("utf-8 path")])?;
    println!("\n{}", std::fs::read_to_string(report)?);
    Ok(())
}
