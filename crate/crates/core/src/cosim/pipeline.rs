use serde::{Deserialize, Serialize};

use super::{prepare, simulate, LayerCost, Prepared, TransferCost};
use crate::design_space::{Architecture, ExecutionStage, Side};
use crate::error::{Error, Result};
use crate::profile::System;

/// Exclusive resources of the co-inference pipeline; the link is full duplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Device,
    Uplink,
    Edge,
    Downlink,
}

impl Resource {
    pub const ALL: [Resource; 4] = [Resource::Device, Resource::Uplink, Resource::Edge, Resource::Downlink];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineStage {
    pub resource: Resource,
    pub duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub throughput_ips: f64,
    pub makespan_s: f64,
    pub stages: Vec<PipelineStage>,
    /// `(start, end)` of every stage of every batch.
    pub schedule: Vec<Vec<(f64, f64)>>,
}

pub(crate) fn stages_of(
    p: &Prepared<'_>,
    breakdown: &[LayerCost],
    transfers: &[TransferCost],
) -> Vec<PipelineStage> {
    let mut costs = breakdown.iter().peekable();
    let mut messages = transfers.iter();
    let mut out = Vec::new();
    for stage in p.mapping.stages(p.arch) {
        let (resource, duration_s) = match stage {
            ExecutionStage::Compute { side, layers } => {
                let mut t = 0.0;
                while let Some(c) = costs.next_if(|c| layers.contains(&c.layer)) {
                    t += c.latency_s;
                }
                let r = match side {
                    Side::Device => Resource::Device,
                    Side::Edge => Resource::Edge,
                };
                (r, t)
            }
            ExecutionStage::Transfer { from, .. } => {
                let m = messages.next().expect("one transfer cost per message");
                let r = match from {
                    Side::Device => Resource::Uplink,
                    Side::Edge => Resource::Downlink,
                };
                (r, m.total_s())
            }
            ExecutionStage::Return => {
                let m = messages.next().expect("one transfer cost per message");
                (Resource::Downlink, m.total_s())
            }
        };
        out.push(PipelineStage { resource, duration_s });
    }
    out
}

/// Non-delay list schedule of `num_batches` identical jobs over `stages`.
///
/// Repeatedly starts the pending stage with the earliest feasible start time,
/// breaking ties by lowest `(batch, stage)`. With `depth = Some(d)`, batch `b`
/// may not start before batch `b - d` has finished.
pub(crate) fn schedule(stages: &[PipelineStage], num_batches: usize, depth: Option<usize>) -> PipelineResult {
    let s = stages.len();
    let mut schedule: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(s); num_batches];
    let mut next = vec![0usize; num_batches];
    let mut free = [0.0f64; 4];
    let mut remaining = num_batches * s;
    while remaining > 0 {
        let mut best: Option<(f64, usize)> = None;
        for b in 0..num_batches {
            let j = next[b];
            if j == s {
                continue;
            }
            let ready = if j > 0 {
                schedule[b][j - 1].1
            } else {
                match depth {
                    Some(d) if b >= d => {
                        if next[b - d] < s {
                            continue;
                        }
                        schedule[b - d][s - 1].1
                    }
                    _ => 0.0,
                }
            };
            let start = ready.max(free[stages[j].resource.index()]);
            if best.map_or(true, |(t, _)| start < t) {
                best = Some((start, b));
            }
        }
        let (start, b) = best.expect("some stage is always schedulable");
        let j = next[b];
        let end = start + stages[j].duration_s;
        free[stages[j].resource.index()] = end;
        schedule[b].push((start, end));
        next[b] += 1;
        remaining -= 1;
    }
    let makespan_s = schedule
        .iter()
        .filter_map(|b| b.last().map(|x| x.1))
        .fold(0.0, f64::max);
    PipelineResult {
        throughput_ips: num_batches as f64 / makespan_s,
        makespan_s,
        stages: stages.to_vec(),
        schedule,
    }
}

/// Pipelined execution of `num_batches` inferences; `depth` caps batches in flight.
pub fn simulate_pipeline(
    arch: &Architecture,
    sys: &System,
    num_batches: usize,
    depth: Option<usize>,
) -> Result<PipelineResult> {
    if num_batches == 0 {
        return Err(Error::Precondition("num_batches must be >= 1".into()));
    }
    if depth == Some(0) {
        return Err(Error::Precondition("pipeline depth must be >= 1".into()));
    }
    let est = simulate(arch, sys)?;
    let p = prepare(arch)?;
    let stages = stages_of(&p, &est.breakdown, &est.transfers);
    Ok(schedule(&stages, num_batches, depth))
}
