//! Helpers shared by the integration test binaries.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::path::Path;

use coforge::cli::run_from;
use coforge::cosim::{PipelineStage, Resource};

/// Runs the command line in `ws` as the binary would.
pub fn cli(ws: &Path, args: &[&str]) -> coforge::Result<()> {
    let mut full = vec!["coforge", "--workspace", ws.to_str().unwrap()];
    full.extend_from_slice(args);
    run_from(full)
}

/// Small pipeline used by the golden report.
pub fn golden_pipeline(ws: &Path) -> String {
    let s = ["--seed", "42"];
    cli(ws, &[&s[..], &["profile", "--profile", "tx2-gpu"]].concat()).unwrap();
    cli(ws, &[&s[..], &["gen-data", "--samples", "600"]].concat()).unwrap();
    cli(ws, &[&s[..], &["train-pred", "--epochs", "8", "--hidden", "16"]].concat()).unwrap();
    cli(ws, &[&s[..], &["search", "--trials", "300", "--tuning-iters", "20"]].concat()).unwrap();
    let out = ws.join("report.md");
    cli(ws, &["report", "--out", out.to_str().unwrap()]).unwrap();
    std::fs::read_to_string(out).unwrap()
}

pub const GOLDEN_REPORT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden_report.md");

/// Time-ordered event for the reference simulator.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Event {
    time: f64,
    batch: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time.total_cmp(&other.time).then(self.batch.cmp(&other.batch))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Reference discrete-event simulation of `num_batches` jobs flowing through `stages`.
///
/// Each resource serves one job at a time. Whenever a resource is idle it
/// starts the waiting job of the lowest batch. A batch is admitted once batch
/// `b - depth` has left the pipeline. Returns `(start, end)` per stage per batch.
pub fn reference_schedule(stages: &[PipelineStage], num_batches: usize, depth: Option<usize>) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new(); num_batches];
    let mut waiting: [BTreeSet<usize>; 4] = Default::default();
    let mut busy = [false; 4];
    let mut events = BinaryHeap::new();
    let admit_now = depth.unwrap_or(num_batches).min(num_batches);
    for b in 0..admit_now {
        waiting[stages[0].resource.index()].insert(b);
    }
    let mut now = 0.0;
    loop {
        // Dispatch every idle resource at the current time.
        for r in Resource::ALL {
            let i = r.index();
            if busy[i] {
                continue;
            }
            if let Some(b) = waiting[i].pop_first() {
                let stage = &stages[out[b].len()];
                let end = now + stage.duration_s;
                out[b].push((now, end));
                busy[i] = true;
                events.push(Reverse(Event { time: end, batch: b }));
            }
        }
        let Some(Reverse(first)) = events.pop() else { break };
        now = first.time;
        let mut done = vec![first];
        while let Some(Reverse(e)) = events.peek().copied() {
            if e.time != now {
                break;
            }
            events.pop();
            done.push(e);
        }
        for e in done {
            let finished = out[e.batch].len() - 1;
            busy[stages[finished].resource.index()] = false;
            if finished + 1 < stages.len() {
                waiting[stages[finished + 1].resource.index()].insert(e.batch);
            } else if let Some(d) = depth.filter(|d| e.batch + d < num_batches) {
                waiting[stages[0].resource.index()].insert(e.batch + d);
            }
        }
    }
    out
}
