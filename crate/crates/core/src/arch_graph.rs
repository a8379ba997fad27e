//! Architecture graphs and node features for the performance predictors.
//!
//! Every layer becomes a node, linked in layer order, plus one global node
//! connected to all others in both directions. Every node carries a
//! self-loop. Node features are a one-hot type code followed by one z-scored
//! performance value taken from the lookup table.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::design_space::{
    check_validity, comm_volume_traced, op_shape, trace_shapes, Architecture, Mapping, OpKind,
    Side,
};
use crate::error::{Error, Result};
use crate::profile::System;

/// One-hot slots: six operation kinds plus the global node.
pub const TYPE_SLOTS: usize = 7;
/// Width of enhanced features (one-hot plus one performance scalar).
pub const FEATURE_WIDTH: usize = TYPE_SLOTS + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Op(OpKind),
    Global,
}

impl NodeKind {
    pub fn slot(self) -> usize {
        match self {
            NodeKind::Op(op) => op.index(),
            NodeKind::Global => TYPE_SLOTS - 1,
        }
    }
}

/// Which per-node scalar accompanies the one-hot code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Latency,
    Energy,
    /// Type code only, width [`TYPE_SLOTS`].
    OneHot,
}

impl FeatureKind {
    pub fn width(self) -> usize {
        match self {
            FeatureKind::OneHot => TYPE_SLOTS,
            _ => FEATURE_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchGraph {
    /// Layer nodes in order, then the global node.
    pub nodes: Vec<NodeKind>,
    /// Directed `(source, target)` pairs, self-loops included.
    pub edges: Vec<(usize, usize)>,
}

impl ArchGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn global_node(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Sources of the edges entering each node, in edge order.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(s, t) in &self.edges {
            out[t].push(s);
        }
        out
    }

    pub fn adjacency(&self) -> Array2<u8> {
        let n = self.nodes.len();
        let mut a = Array2::zeros((n, n));
        for &(s, t) in &self.edges {
            a[[s, t]] = 1;
        }
        a
    }

    /// Graphviz rendering, optionally with the performance scalar of each node.
    pub fn to_dot(&self, arch: &Architecture, features: Option<&Array2<f64>>) -> String {
        let mut s = String::from("digraph arch {\n  rankdir=LR;\n");
        for (i, kind) in self.nodes.iter().enumerate() {
            let mut label = match kind {
                NodeKind::Op(_) => arch.layers[i].to_string(),
                NodeKind::Global => "global".to_string(),
            };
            if let Some(f) = features.filter(|f| f.ncols() == FEATURE_WIDTH) {
                let _ = write!(label, "\\n{:.4}", f[[i, FEATURE_WIDTH - 1]]);
            }
            let shape = if *kind == NodeKind::Global { "doublecircle" } else { "box" };
            let _ = writeln!(s, "  n{i} [label=\"{label}\", shape={shape}];");
        }
        for &(a, b) in &self.edges {
            let style = if a == b || a == self.global_node() || b == self.global_node() {
                " [style=dotted]"
            } else {
                ""
            };
            let _ = writeln!(s, "  n{a} -> n{b}{style};");
        }
        s.push_str("}\n");
        s
    }
}

pub fn build_graph(arch: &Architecture) -> Result<ArchGraph> {
    let report = check_validity(arch);
    if !report.is_valid() {
        return Err(Error::InvalidArchitecture(format!("{:?}", report.violations)));
    }
    let l = arch.len();
    let mut nodes: Vec<NodeKind> = arch.layers.iter().map(|layer| NodeKind::Op(layer.kind())).collect();
    nodes.push(NodeKind::Global);
    let mut edges = Vec::with_capacity(l - 1 + (l + 1) + 2 * l);
    for i in 1..l {
        edges.push((i - 1, i));
    }
    for i in 0..=l {
        edges.push((i, i));
    }
    for i in 0..l {
        edges.push((l, i));
        edges.push((i, l));
    }
    Ok(ArchGraph { nodes, edges })
}

fn one_hot(graph: &ArchGraph, width: usize) -> Array2<f64> {
    let mut x = Array2::zeros((graph.num_nodes(), width));
    for (i, kind) in graph.nodes.iter().enumerate() {
        x[[i, kind.slot()]] = 1.0;
    }
    x
}

/// Raw (unnormalised) latency or energy value of every layer node.
fn raw_values(arch: &Architecture, mapping: &Mapping, sys: &System, energy: bool) -> Result<Vec<f64>> {
    if mapping.sides.len() != arch.len() {
        return Err(Error::Shape(format!(
            "mapping covers {} layers, architecture has {}",
            mapping.sides.len(),
            arch.len()
        )));
    }
    let trace = trace_shapes(arch)?;
    let net = &sys.config.network;
    let dev = &sys.config.device;
    let mut out = Vec::with_capacity(arch.len());
    for (i, layer) in arch.layers.iter().enumerate() {
        let side = mapping.sides[i];
        let v = match op_shape(arch, &trace, i) {
            None => {
                let bytes = comm_volume_traced(arch, &trace, i);
                let t = net.transfer_time(bytes) + net.per_message_overhead_s;
                if energy {
                    dev.comm_power_w * t
                } else {
                    t
                }
            }
            Some(shape) => {
                let perf = sys.op_perf(layer.kind(), shape, side)?;
                match (energy, side) {
                    (false, _) => perf.latency_s,
                    (true, Side::Device) => perf.energy_j,
                    (true, Side::Edge) => dev.idle_power_w * perf.latency_s,
                }
            }
        };
        out.push(v);
    }
    Ok(out)
}

fn enhanced(graph: &ArchGraph, arch: &Architecture, mapping: &Mapping, sys: &System, energy: bool) -> Result<Array2<f64>> {
    if graph.num_nodes() != arch.len() + 1 {
        return Err(Error::Shape("graph does not belong to this architecture".into()));
    }
    let stats = if energy {
        sys.lut.norm_stats.energy
    } else {
        sys.lut.norm_stats.latency
    };
    let mut x = one_hot(graph, FEATURE_WIDTH);
    for (i, v) in raw_values(arch, mapping, sys, energy)?.into_iter().enumerate() {
        x[[i, FEATURE_WIDTH - 1]] = stats.normalize(v);
    }
    Ok(x)
}

/// One-hot type plus z-scored latency on the mapped endpoint (transfer time for `Communicate`).
pub fn latency_features(graph: &ArchGraph, arch: &Architecture, mapping: &Mapping, sys: &System) -> Result<Array2<f64>> {
    enhanced(graph, arch, mapping, sys, false)
}

/// One-hot type plus z-scored device energy: run energy for device ops,
/// idle power times edge time for edge ops, comm power times transfer time for `Communicate`.
pub fn energy_features(graph: &ArchGraph, arch: &Architecture, mapping: &Mapping, sys: &System) -> Result<Array2<f64>> {
    enhanced(graph, arch, mapping, sys, true)
}

pub fn one_hot_features(graph: &ArchGraph) -> Array2<f64> {
    one_hot(graph, TYPE_SLOTS)
}

pub fn features(kind: FeatureKind, graph: &ArchGraph, arch: &Architecture, mapping: &Mapping, sys: &System) -> Result<Array2<f64>> {
    match kind {
        FeatureKind::Latency => latency_features(graph, arch, mapping, sys),
        FeatureKind::Energy => energy_features(graph, arch, mapping, sys),
        FeatureKind::OneHot => Ok(one_hot_features(graph)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{derive_mapping, Aggr, InputShape, Layer, Layer::*};

    fn arch(layers: Vec<Layer>) -> Architecture {
        Architecture::new(layers, InputShape(1024, 3)).unwrap()
    }

    fn split_fixture() -> Architecture {
        arch(vec![
            Sample { k: 20 },
            Aggregate { aggr: Aggr::Max },
            Communicate,
            Combine { out_dim: 64 },
            GlobalPooling,
        ])
    }

    #[test]
    fn edge_counts() {
        for l in 1..=12usize {
            let layers = vec![Combine { out_dim: 8 }; l];
            let g = build_graph(&arch(layers)).unwrap();
            assert_eq!(g.num_nodes(), l + 1);
            assert_eq!(g.edges.len(), (l - 1) + (l + 1) + 2 * l);
        }
    }

    #[test]
    fn adjacency_matches_golden() {
        let g = build_graph(&split_fixture()).unwrap();
        let golden = include_str!("../fixtures/adjacency_5_layer.txt");
        let want: Vec<Vec<u8>> = golden
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        let got = g.adjacency();
        assert_eq!(got.nrows(), want.len());
        for (i, row) in want.iter().enumerate() {
            assert_eq!(got.row(i).to_vec(), *row, "row {i}");
        }
    }

    #[test]
    fn dag_ignoring_loops_and_global() {
        let g = build_graph(&split_fixture()).unwrap();
        let gl = g.global_node();
        assert!(g.edges.iter().all(|&(s, t)| s == t || s == gl || t == gl || s < t));
        assert_eq!(g.nodes.iter().filter(|k| **k == NodeKind::Global).count(), 1);
    }

    #[test]
    fn invalid_is_rejected() {
        assert!(build_graph(&arch(vec![Communicate, Combine { out_dim: 8 }])).is_err());
    }

    #[test]
    fn features_follow_mapping() {
        let sys = System::builtin("tx2-gpu").unwrap();
        let a = split_fixture();
        let g = build_graph(&a).unwrap();
        let m = derive_mapping(&a).unwrap();
        let lat = latency_features(&g, &a, &m, &sys).unwrap();
        let en = energy_features(&g, &a, &m, &sys).unwrap();
        assert_eq!(lat.ncols(), FEATURE_WIDTH);
        assert_eq!(lat[[g.global_node(), FEATURE_WIDTH - 1]], 0.0);
        assert_eq!(lat[[g.global_node(), TYPE_SLOTS - 1]], 1.0);

        // edge-side combine: idle power times its edge latency, then z-scored
        let trace = trace_shapes(&a).unwrap();
        let shape = op_shape(&a, &trace, 3).unwrap();
        let t = sys.lut.lookup(OpKind::Combine, shape, "gpu-like").unwrap().latency_s;
        let raw = sys.config.device.idle_power_w * t;
        assert_eq!(en[[3, FEATURE_WIDTH - 1]], sys.lut.norm_stats.energy.normalize(raw));

        // flipping one op's side changes exactly that row of the energy matrix
        let mut flipped = m.clone();
        flipped.sides[3] = Side::Device;
        let en2 = energy_features(&g, &a, &flipped, &sys).unwrap();
        let lat2 = latency_features(&g, &a, &flipped, &sys).unwrap();
        for i in 0..g.num_nodes() {
            assert_eq!(en.row(i) == en2.row(i), i != 3);
            assert_eq!(lat.row(i) == lat2.row(i), i != 3);
        }
    }

    #[test]
    fn dot_dump_lists_every_node() {
        let a = split_fixture();
        let g = build_graph(&a).unwrap();
        let dot = g.to_dot(&a, None);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("label=").count(), 6);
    }
}
