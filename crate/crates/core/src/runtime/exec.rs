use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kernels::{combine_weights, run_kernel, synthetic_input, ExecState, Knn};
use super::wire::{unpack, Codec, Frame, MsgType, DEFAULT_COMPRESS_THRESHOLD};
use crate::design_space::{
    check_validity, derive_mapping, forwards_graph, trace_shapes, Architecture, ExecutionStage, Layer, LayerShape, Mapping,
    ShapeTrace, Side,
};
use crate::error::{Error, Result};

/// Everything the edge needs to execute its share of an architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentDescriptor {
    pub arch: Architecture,
    pub mapping: Mapping,
    pub trace: ShapeTrace,
    pub codec: Codec,
    pub compress_threshold: usize,
    pub weight_seed: u64,
    /// Identity Combine weights, for reproducible transcripts.
    pub test_mode: bool,
}

impl DeploymentDescriptor {
    pub fn new(arch: &Architecture, codec: Codec, weight_seed: u64, test_mode: bool) -> Result<Self> {
        let report = check_validity(arch);
        if !report.is_valid() {
            return Err(Error::InvalidArchitecture(format!("{:?}", report.violations)));
        }
        if arch.dtype_bytes != 4 {
            return Err(Error::Precondition(format!(
                "runtime kernels use f32, architecture declares {} bytes per value",
                arch.dtype_bytes
            )));
        }
        Ok(DeploymentDescriptor {
            arch: arch.clone(),
            mapping: derive_mapping(arch)?,
            trace: trace_shapes(arch)?,
            codec,
            compress_threshold: DEFAULT_COMPRESS_THRESHOLD,
            weight_seed,
            test_mode,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("descriptor serializes")
    }

    /// Parses and cross-checks the mapping and shape trace against the architecture.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let d: DeploymentDescriptor =
            serde_json::from_slice(bytes).map_err(|e| Error::Protocol(format!("bad deployment descriptor: {e}")))?;
        let fresh = DeploymentDescriptor::new(&d.arch, d.codec, d.weight_seed, d.test_mode)
            .map_err(|e| Error::Protocol(format!("deployment rejected: {e}")))?;
        if fresh.mapping != d.mapping || fresh.trace != d.trace {
            return Err(Error::Protocol("descriptor mapping or shape trace disagrees with its architecture".into()));
        }
        Ok(d)
    }
}

/// A descriptor with its execution plan and Combine weights materialised.
#[derive(Clone, Debug)]
pub struct Deployment {
    pub desc: DeploymentDescriptor,
    pub stages: Vec<ExecutionStage>,
    weights: Vec<Option<Array2<f32>>>,
}

/// What a side does next for a batch.
#[derive(Debug)]
pub(crate) enum Step {
    Send(Frame, usize),
    /// The batch finished on the device with this output.
    Done(ExecState),
    /// The edge shipped the final result and has nothing left.
    Finished(Frame),
}

impl Deployment {
    pub fn new(desc: DeploymentDescriptor) -> Self {
        let stages = desc.mapping.stages(&desc.arch);
        let weights = desc
            .arch
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| match *l {
                Layer::Combine { out_dim } => Some(combine_weights(
                    desc.weight_seed,
                    i,
                    desc.trace.input_of(i).feature_dim as usize,
                    out_dim as usize,
                    desc.test_mode,
                )),
                _ => None,
            })
            .collect();
        Deployment { desc, stages, weights }
    }

    pub fn input(&self, seed: u64, batch_id: u32) -> ExecState {
        let s = self.desc.trace.input;
        ExecState::new(synthetic_input(seed, batch_id, s.num_nodes as usize, s.feature_dim as usize))
    }

    pub fn involves_edge(&self) -> bool {
        self.desc.mapping.sides.contains(&Side::Edge)
    }

    pub fn run_layers(&self, range: std::ops::Range<usize>, state: &mut ExecState) -> Result<()> {
        for i in range {
            let layer = &self.desc.arch.layers[i];
            run_kernel(layer, state, self.desc.trace.layers[i].active_k as usize, self.weights[i].as_ref())?;
            let want = self.desc.trace.layers[i];
            if state.x.dim() != (want.num_nodes as usize, want.feature_dim as usize) {
                return Err(Error::Shape(format!(
                    "layer {i} produced {:?}, trace expects {}x{}",
                    state.x.dim(),
                    want.num_nodes,
                    want.feature_dim
                )));
            }
        }
        Ok(())
    }

    /// Whether `side` has no work left for a batch at `cursor`.
    pub(crate) fn side_done(&self, side: Side, cursor: usize) -> bool {
        !self.stages[cursor.min(self.stages.len())..].iter().any(|st| match st {
            ExecutionStage::Compute { side: s, .. } => *s == side,
            ExecutionStage::Transfer { .. } => true,
            ExecutionStage::Return => true,
        })
    }

    /// Runs `side`'s stages from `cursor` until something must be sent or the batch ends.
    pub(crate) fn advance(&self, side: Side, cursor: &mut usize, batch_id: u32, mut state: ExecState) -> Result<Step> {
        while let Some(stage) = self.stages.get(*cursor) {
            match stage {
                ExecutionStage::Compute { side: s, layers } if *s == side => {
                    self.run_layers(layers.clone(), &mut state)?;
                    *cursor += 1;
                }
                ExecutionStage::Transfer { layer, from } if *from == side => {
                    *cursor += 1;
                    let (frame, raw) = self.encode_transfer(*layer, batch_id, &state);
                    return Ok(Step::Send(frame, raw));
                }
                ExecutionStage::Return if side == Side::Edge => {
                    *cursor += 1;
                    let (frame, _) = self.encode(MsgType::Result, batch_id, &state.x, None);
                    return Ok(Step::Finished(frame));
                }
                other => {
                    return Err(Error::Protocol(format!("{side:?} reached stage {other:?} owned by the other side")));
                }
            }
        }
        match side {
            Side::Device => Ok(Step::Done(state)),
            Side::Edge => Err(Error::Protocol("edge ran past the last stage without a result".into())),
        }
    }

    fn encode_transfer(&self, layer: usize, batch_id: u32, state: &ExecState) -> (Frame, usize) {
        let s = self.desc.trace.input_of(layer);
        if carries_graph(&self.desc.arch, s, layer) {
            self.encode(MsgType::Graph, batch_id, &state.x, state.graph.as_ref())
        } else {
            self.encode(MsgType::Tensor, batch_id, &state.x, None)
        }
    }

    fn encode(&self, t: MsgType, batch_id: u32, x: &Array2<f32>, graph: Option<&Knn>) -> (Frame, usize) {
        let mut raw = Vec::with_capacity(x.len() * 4 + graph.map_or(0, |g| g.indices.len() * 8));
        for v in x.iter() {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(g) = graph {
            for i in 0..g.num_nodes() {
                for &j in g.neighbors(i) {
                    raw.extend_from_slice(&(i as u32).to_le_bytes());
                    raw.extend_from_slice(&j.to_le_bytes());
                }
            }
        }
        let raw_len = raw.len();
        let (flags, payload) = self.desc.codec.pack(raw, self.desc.compress_threshold);
        (Frame { msg_type: t, batch_id, flags, payload }, raw_len)
    }

    /// Finds the next stage fed by the other side, decodes `frame` for it and moves past it.
    pub(crate) fn receive(&self, side: Side, cursor: &mut usize, frame: &Frame) -> Result<(ExecState, bool)> {
        let other = side.opposite();
        let mut i = *cursor;
        let (shape, graph, is_return) = loop {
            match self.stages.get(i) {
                Some(ExecutionStage::Transfer { layer, from }) if *from == other => {
                    let s = self.desc.trace.input_of(*layer);
                    break (s, carries_graph(&self.desc.arch, s, *layer), false);
                }
                Some(ExecutionStage::Return) if side == Side::Device => break (self.desc.trace.output(), false, true),
                Some(_) => i += 1,
                None => return Err(Error::Protocol(format!("unexpected {:?} for batch {}", frame.msg_type, frame.batch_id))),
            }
        };
        let want = match (is_return, graph) {
            (true, _) => MsgType::Result,
            (false, true) => MsgType::Graph,
            (false, false) => MsgType::Tensor,
        };
        if frame.msg_type != want {
            return Err(Error::Protocol(format!("expected {want:?} for batch {}, got {:?}", frame.batch_id, frame.msg_type)));
        }
        let raw = unpack(frame.flags, &frame.payload)?;
        let state = decode_state(&raw, shape, graph)?;
        *cursor = i + 1;
        Ok((state, is_return))
    }
}

fn carries_graph(arch: &Architecture, s: LayerShape, layer: usize) -> bool {
    s.has_active_graph && forwards_graph(arch, layer)
}

fn decode_state(raw: &[u8], s: LayerShape, graph: bool) -> Result<ExecState> {
    let (n, f, k) = (s.num_nodes as usize, s.feature_dim as usize, s.active_k as usize);
    let feat = n * f * 4;
    let want = feat + if graph { n * k * 8 } else { 0 };
    if raw.len() != want {
        return Err(Error::Protocol(format!("payload of {} bytes, shape {n}x{f} needs {want}", raw.len())));
    }
    let x: Vec<f32> = raw[..feat].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let x = Array2::from_shape_vec((n, f), x).expect("length checked");
    let graph = if graph {
        let mut indices = Vec::with_capacity(n * k);
        for (e, c) in raw[feat..].chunks_exact(8).enumerate() {
            let src = u32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let dst = u32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            if src as usize != e / k.max(1) || dst as usize >= n {
                return Err(Error::Protocol(format!("bad graph edge ({src}, {dst}) at position {e}")));
            }
            indices.push(dst);
        }
        Some(Knn { k, indices })
    } else {
        None
    };
    Ok(ExecState { x, graph, skip: None })
}

/// First 16 hex digits of the SHA-256 of the tensor's little-endian bytes.
pub fn tensor_digest(x: &Array2<f32>) -> String {
    let mut h = Sha256::new();
    for v in x.iter() {
        h.update(v.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Runs the whole architecture in one process; the reference for remote runs.
pub fn run_local(desc: &DeploymentDescriptor, input_seed: u64, batch_id: u32) -> Result<Array2<f32>> {
    let dep = Deployment::new(desc.clone());
    let mut state = dep.input(input_seed, batch_id);
    for (i, l) in desc.arch.layers.iter().enumerate() {
        if !l.is_communicate() {
            dep.run_layers(i..i + 1, &mut state)?;
        }
    }
    Ok(state.x)
}
