//! Analytic co-inference simulator.
//!
//! [`simulate`] is the ground truth used to label predictor datasets and to
//! re-check search results. Operation times come from the system lookup
//! table, communication from the network model.

mod dataset;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::design_space::{
    check_validity, derive_mapping, op_shape, return_volume, trace_shapes, Architecture, OpKind,
    Side,
};
use crate::design_space::{ExecutionStage, Mapping, ShapeTrace};
use crate::error::{Error, Result};
use crate::profile::System;

pub use dataset::{
    generate_dataset, read_records, write_records, Dataset, DatasetRecord, REJECTION_WINDOW,
};
pub use pipeline::{simulate_pipeline, PipelineResult, PipelineStage, Resource};

/// Batches used for the throughput figure reported in a [`PerfEstimate`].
pub const THROUGHPUT_BATCHES: usize = 32;
/// In-flight batches of the reported pipelined throughput.
pub const THROUGHPUT_DEPTH: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer: usize,
    pub op: OpKind,
    pub side: Side,
    pub latency_s: f64,
    /// Device energy spent while this layer runs.
    pub device_energy_j: f64,
}

/// One device-edge message: a `Communicate` layer or the implicit return (`layer == None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCost {
    pub layer: Option<usize>,
    pub from: Side,
    pub bytes: u64,
    /// Wire time of the compressed payload.
    pub wire_s: f64,
    pub overhead_s: f64,
    pub device_energy_j: f64,
}

impl TransferCost {
    pub fn total_s(&self) -> f64 {
        self.wire_s + self.overhead_s
    }
}

/// Device energy split into idle (edge busy), run (device compute) and comm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub idle_j: f64,
    pub run_j: f64,
    pub comm_j: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.idle_j + self.run_j + self.comm_j
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimate {
    pub latency_s: f64,
    pub device_energy_j: f64,
    /// Compute layers in execution order.
    pub breakdown: Vec<LayerCost>,
    pub transfers: Vec<TransferCost>,
    pub comm_total_s: f64,
    pub energy: EnergyTerms,
    pub pipelined_throughput_ips: f64,
}

impl PerfEstimate {
    pub fn compute_total_s(&self) -> f64 {
        self.breakdown.iter().map(|c| c.latency_s).sum()
    }
}

/// Validated architecture with its shapes and mapping, shared by every evaluator.
pub(crate) struct Prepared<'a> {
    pub arch: &'a Architecture,
    pub trace: ShapeTrace,
    pub mapping: Mapping,
}

pub(crate) fn prepare(arch: &Architecture) -> Result<Prepared<'_>> {
    let report = check_validity(arch);
    if !report.is_valid() {
        return Err(Error::InvalidArchitecture(format!("{:?}", report.violations)));
    }
    let trace = trace_shapes(arch)?;
    let mapping = derive_mapping(arch)?;
    Ok(Prepared { arch, trace, mapping })
}

fn layer_costs(p: &Prepared<'_>, sys: &System, fixed_power: Option<f64>) -> Result<Vec<LayerCost>> {
    let dev = &sys.config.device;
    let mut out = Vec::with_capacity(p.arch.len());
    for (i, layer) in p.arch.layers.iter().enumerate() {
        let Some(shape) = op_shape(p.arch, &p.trace, i) else {
            continue;
        };
        let side = p.mapping.sides[i];
        let op = layer.kind();
        let t = sys.op_perf(op, shape, side)?.latency_s;
        let power = match side {
            Side::Device => match fixed_power {
                Some(w) => w,
                None => dev.run_power(op, shape.f).expect("compute op"),
            },
            Side::Edge => dev.idle_power_w,
        };
        out.push(LayerCost {
            layer: i,
            op,
            side,
            latency_s: t,
            device_energy_j: power * t,
        });
    }
    Ok(out)
}

fn transfer_costs(p: &Prepared<'_>, sys: &System) -> Vec<TransferCost> {
    let net = &sys.config.network;
    let comm_power = sys.config.device.comm_power_w;
    let mut out = Vec::new();
    for stage in p.mapping.stages(p.arch) {
        let (layer, from, bytes) = match stage {
            ExecutionStage::Transfer { layer, from } => (
                Some(layer),
                from,
                crate::design_space::comm_volume_traced(p.arch, &p.trace, layer),
            ),
            ExecutionStage::Return => (None, Side::Edge, return_volume(p.arch, &p.trace)),
            ExecutionStage::Compute { .. } => continue,
        };
        let wire_s = net.transfer_time(bytes);
        let overhead_s = net.per_message_overhead_s;
        out.push(TransferCost {
            layer,
            from,
            bytes,
            wire_s,
            overhead_s,
            device_energy_j: comm_power * (wire_s + overhead_s),
        });
    }
    out
}

fn estimate(arch: &Architecture, sys: &System, fixed_power: Option<f64>) -> Result<PerfEstimate> {
    let p = prepare(arch)?;
    let breakdown = layer_costs(&p, sys, fixed_power)?;
    let transfers = transfer_costs(&p, sys);
    let compute: f64 = breakdown.iter().map(|c| c.latency_s).sum();
    let comm_total_s: f64 = transfers.iter().map(TransferCost::total_s).sum();
    let mut energy = EnergyTerms::default();
    for c in &breakdown {
        match c.side {
            Side::Device => energy.run_j += c.device_energy_j,
            Side::Edge => energy.idle_j += c.device_energy_j,
        }
    }
    energy.comm_j = transfers.iter().map(|t| t.device_energy_j).sum();
    let stages = pipeline::stages_of(&p, &breakdown, &transfers);
    let pipelined = pipeline::schedule(&stages, THROUGHPUT_BATCHES, Some(THROUGHPUT_DEPTH));
    Ok(PerfEstimate {
        latency_s: compute + comm_total_s,
        device_energy_j: energy.total(),
        breakdown,
        transfers,
        comm_total_s,
        energy,
        pipelined_throughput_ips: pipelined.throughput_ips,
    })
}

/// Sequential end-to-end latency and device energy of a valid architecture.
pub fn simulate(arch: &Architecture, sys: &System) -> Result<PerfEstimate> {
    estimate(arch, sys, None)
}

/// Sum of lookup-table op latencies plus compressed wire time of every
/// message, without per-message overhead. Never exceeds [`simulate`].
pub fn lut_estimate(arch: &Architecture, sys: &System) -> Result<f64> {
    let p = prepare(arch)?;
    let breakdown = layer_costs(&p, sys, None)?;
    let transfers = transfer_costs(&p, sys);
    let compute: f64 = breakdown.iter().map(|c| c.latency_s).sum();
    let wire: f64 = transfers.iter().map(|t| t.wire_s).sum();
    Ok(compute + wire)
}

/// Mean device run power over all compute kinds, each at the midpoint of its curve.
pub fn average_run_power(sys: &System) -> f64 {
    let dev = &sys.config.device;
    let total: f64 = OpKind::COMPUTE
        .iter()
        .map(|&op| {
            let c = dev.power_curve(op).expect("compute op");
            0.5 * (c.p_lo + c.p_hi)
        })
        .sum();
    total / OpKind::COMPUTE.len() as f64
}

/// Device energy when every device op is charged one average run power.
pub fn fixed_power_energy(arch: &Architecture, sys: &System) -> Result<f64> {
    Ok(estimate(arch, sys, Some(average_run_power(sys)))?.device_energy_j)
}
