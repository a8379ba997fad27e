use serde::{Deserialize, Serialize};

use super::{Architecture, Layer, INDEX_BYTES, MESSAGE_HEADER_BYTES};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub num_nodes: u32,
    pub feature_dim: u32,
    pub has_active_graph: bool,
    pub active_k: u32,
}

/// Output shape after every layer, plus the architecture input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeTrace {
    pub input: LayerShape,
    pub layers: Vec<LayerShape>,
}

impl ShapeTrace {
    pub fn input_of(&self, layer: usize) -> LayerShape {
        if layer == 0 {
            self.input
        } else {
            self.layers[layer - 1]
        }
    }

    pub fn output(&self) -> LayerShape {
        *self.layers.last().unwrap_or(&self.input)
    }
}

/// Work dimensions of one compute layer, the key space of the lookup table.
///
/// `n` and `f` are the node count and feature width that drive the cost; `p`
/// is the operation-specific extra dimension (neighbour count for `Sample`
/// and `Aggregate`, output width for `Combine`, 1 otherwise).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpShape {
    pub n: u32,
    pub f: u32,
    pub p: u32,
}

pub fn trace_shapes(arch: &Architecture) -> Result<ShapeTrace> {
    let input = LayerShape {
        num_nodes: arch.input.num_nodes(),
        feature_dim: arch.input.feature_dim(),
        has_active_graph: false,
        active_k: 0,
    };
    let mut cur = input;
    // Input width of the most recent Combine still usable as a skip source.
    let mut skip_width: Option<u32> = None;
    let mut layers = Vec::with_capacity(arch.len());
    for (i, layer) in arch.layers.iter().enumerate() {
        match *layer {
            Layer::Sample { k } => {
                if cur.num_nodes < 2 {
                    return Err(Error::Shape(format!(
                        "layer {i}: sample needs at least 2 nodes, have {}",
                        cur.num_nodes
                    )));
                }
                cur.has_active_graph = true;
                cur.active_k = k.min(cur.num_nodes - 1);
            }
            Layer::Aggregate { .. } => {
                if !cur.has_active_graph {
                    return Err(Error::Shape(format!("layer {i}: aggregate without an active graph")));
                }
            }
            Layer::Communicate => skip_width = None,
            Layer::Combine { out_dim } => {
                skip_width = Some(cur.feature_dim);
                cur.feature_dim = out_dim;
            }
            Layer::GlobalPooling => {
                cur.num_nodes = 1;
                cur.has_active_graph = false;
                cur.active_k = 0;
                skip_width = None;
            }
            Layer::Connect => match skip_width {
                Some(w) => cur.feature_dim += w,
                None => {
                    return Err(Error::Shape(format!("layer {i}: connect without a skip source")))
                }
            },
        }
        layers.push(cur);
    }
    Ok(ShapeTrace { input, layers })
}

/// Work dimensions of layer `i`; `None` for `Communicate`.
pub fn op_shape(arch: &Architecture, trace: &ShapeTrace, i: usize) -> Option<OpShape> {
    let inp = trace.input_of(i);
    let out = trace.layers[i];
    let shape = match arch.layers[i] {
        Layer::Communicate => return None,
        Layer::Sample { .. } | Layer::Aggregate { .. } => OpShape {
            n: inp.num_nodes,
            f: inp.feature_dim,
            p: out.active_k,
        },
        Layer::Combine { out_dim } => OpShape {
            n: inp.num_nodes,
            f: inp.feature_dim,
            p: out_dim,
        },
        Layer::GlobalPooling => OpShape {
            n: inp.num_nodes,
            f: inp.feature_dim,
            p: 1,
        },
        Layer::Connect => OpShape {
            n: out.num_nodes,
            f: out.feature_dim,
            p: 1,
        },
    };
    Some(shape)
}

/// Whether the active graph has to travel with the `Communicate` at `idx`:
/// some `Aggregate` follows before the next `Sample` or `GlobalPooling`.
pub(crate) fn forwards_graph(arch: &Architecture, idx: usize) -> bool {
    for layer in &arch.layers[idx + 1..] {
        match layer {
            Layer::Aggregate { .. } => return true,
            Layer::Sample { .. } | Layer::GlobalPooling => return false,
            _ => {}
        }
    }
    false
}

pub(crate) fn comm_volume_traced(arch: &Architecture, trace: &ShapeTrace, idx: usize) -> u64 {
    let s = trace.input_of(idx);
    let n = u64::from(s.num_nodes);
    let mut bytes = n * u64::from(s.feature_dim) * u64::from(arch.dtype_bytes);
    if s.has_active_graph && forwards_graph(arch, idx) {
        bytes += n * u64::from(s.active_k) * INDEX_BYTES * 2;
    }
    bytes + MESSAGE_HEADER_BYTES
}

/// Bytes on the wire for the `Communicate` at `layer_idx`, header included.
pub fn comm_volume(arch: &Architecture, layer_idx: usize) -> Result<u64> {
    match arch.layers.get(layer_idx) {
        Some(Layer::Communicate) => {}
        other => {
            return Err(Error::Precondition(format!(
                "layer {layer_idx} is {other:?}, not communicate"
            )))
        }
    }
    let trace = trace_shapes(arch)?;
    Ok(comm_volume_traced(arch, &trace, layer_idx))
}

/// Bytes of the implicit final-result transfer (features only, header included).
pub fn return_volume(arch: &Architecture, trace: &ShapeTrace) -> u64 {
    let out = trace.output();
    u64::from(out.num_nodes) * u64::from(out.feature_dim) * u64::from(arch.dtype_bytes)
        + MESSAGE_HEADER_BYTES
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{Aggr, InputShape, Layer::*};

    fn arch(input: (u32, u32), layers: Vec<Layer>) -> Architecture {
        Architecture::new(layers, InputShape(input.0, input.1)).unwrap()
    }

    #[test]
    fn edgeconv_block_shapes() {
        let a = arch(
            (1024, 3),
            vec![Sample { k: 20 }, Aggregate { aggr: Aggr::Max }, Combine { out_dim: 64 }],
        );
        let t = trace_shapes(&a).unwrap();
        let out = t.output();
        assert_eq!((out.num_nodes, out.feature_dim), (1024, 64));
        assert!(out.has_active_graph);
        assert_eq!(out.active_k, 20);
    }

    #[test]
    fn pooling_collapses_nodes() {
        let a = arch(
            (1024, 3),
            vec![
                Sample { k: 20 },
                Aggregate { aggr: Aggr::Max },
                Combine { out_dim: 64 },
                GlobalPooling,
                Combine { out_dim: 40 },
            ],
        );
        let t = trace_shapes(&a).unwrap();
        assert_eq!((t.output().num_nodes, t.output().feature_dim), (1, 40));
        assert!(!t.layers[3].has_active_graph);
    }

    #[test]
    fn connect_adds_skip_width() {
        let a = arch((17, 300), vec![Combine { out_dim: 128 }, Connect, Combine { out_dim: 64 }]);
        let t = trace_shapes(&a).unwrap();
        assert_eq!(t.layers[1].feature_dim, 428);
        assert_eq!(op_shape(&a, &t, 1).unwrap(), OpShape { n: 17, f: 428, p: 1 });
        assert_eq!(op_shape(&a, &t, 2).unwrap(), OpShape { n: 17, f: 428, p: 64 });
    }

    #[test]
    fn shape_errors() {
        let a = arch((8, 3), vec![Connect, Combine { out_dim: 4 }]);
        assert!(matches!(trace_shapes(&a), Err(Error::Shape(_))));
        let a = arch((8, 3), vec![Aggregate { aggr: Aggr::Sum }, Combine { out_dim: 4 }]);
        assert!(matches!(trace_shapes(&a), Err(Error::Shape(_))));
    }

    #[test]
    fn k_is_clamped_to_available_neighbours() {
        let a = arch((17, 300), vec![Sample { k: 20 }, Aggregate { aggr: Aggr::Mean }, Combine { out_dim: 8 }]);
        assert_eq!(trace_shapes(&a).unwrap().layers[0].active_k, 16);
    }

    #[test]
    fn comm_volume_features_only() {
        let a = arch(
            (1024, 3),
            vec![
                Sample { k: 20 },
                Aggregate { aggr: Aggr::Max },
                Combine { out_dim: 64 },
                Communicate,
                Combine { out_dim: 64 },
            ],
        );
        assert_eq!(comm_volume(&a, 3).unwrap(), 262_144 + MESSAGE_HEADER_BYTES);
    }

    #[test]
    fn comm_volume_with_graph() {
        let a = arch(
            (1024, 3),
            vec![Sample { k: 20 }, Communicate, Aggregate { aggr: Aggr::Max }, Combine { out_dim: 64 }],
        );
        // 1024*3*4 feature bytes + 1024*20 pairs of two u32 indices
        assert_eq!(comm_volume(&a, 1).unwrap(), 12_288 + 163_840 + MESSAGE_HEADER_BYTES);
    }

    #[test]
    fn comm_volume_after_pooling() {
        let a = arch(
            (1024, 3),
            vec![Combine { out_dim: 40 }, GlobalPooling, Communicate, Combine { out_dim: 40 }],
        );
        assert_eq!(comm_volume(&a, 2).unwrap(), 160 + MESSAGE_HEADER_BYTES);
    }

    #[test]
    fn graph_not_forwarded_when_resampled() {
        let a = arch(
            (64, 3),
            vec![
                Sample { k: 4 },
                Communicate,
                Sample { k: 4 },
                Aggregate { aggr: Aggr::Max },
                Combine { out_dim: 8 },
            ],
        );
        assert_eq!(comm_volume(&a, 1).unwrap(), 64 * 3 * 4 + MESSAGE_HEADER_BYTES);
        assert!(comm_volume(&a, 0).is_err());
    }
}
