//! Operation kernels over synthetic `f32` data.
//!
//! Loops are written out by hand so results are bit-reproducible across
//! machines, which the session transcript golden relies on.

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design_space::{Aggr, Layer};
use crate::error::{Error, Result};

/// Neighbour lists of a k-nearest-neighbour graph, row-major `n x k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub indices: Vec<u32>,
}

impl Knn {
    pub fn num_nodes(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.indices.len() / self.k
        }
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }
}

/// Brute-force k nearest neighbours by squared distance, excluding the point
/// itself; equal distances are ordered by index.
pub fn knn(x: &Array2<f32>, k: usize) -> Result<Knn> {
    let n = x.nrows();
    if k >= n.max(1) && k > 0 {
        return Err(Error::Shape(format!("k = {k} needs more than {n} points")));
    }
    let mut indices = Vec::with_capacity(n * k);
    let mut cand: Vec<(f32, u32)> = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        cand.clear();
        let xi = x.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut d = 0.0f32;
            for (a, b) in xi.iter().zip(x.row(j).iter()) {
                let t = a - b;
                d += t * t;
            }
            cand.push((d, j as u32));
        }
        let order = |a: &(f32, u32), b: &(f32, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k > 0 && k < cand.len() {
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
        }
        cand.sort_unstable_by(order);
        indices.extend(cand.iter().take(k).map(|c| c.1));
    }
    Ok(Knn { k, indices })
}

/// Per-node reduction over its neighbour rows.
pub fn aggregate(x: &Array2<f32>, g: &Knn, aggr: Aggr) -> Result<Array2<f32>> {
    let (n, f) = x.dim();
    if g.num_nodes() != n || g.k == 0 {
        return Err(Error::Shape(format!("graph of {} nodes (k = {}) for {n} feature rows", g.num_nodes(), g.k)));
    }
    let mut out = Array2::<f32>::zeros((n, f));
    for i in 0..n {
        let mut row = out.row_mut(i);
        let nb = g.neighbors(i);
        match aggr {
            Aggr::Max => row.fill(f32::NEG_INFINITY),
            Aggr::Mean | Aggr::Sum => {}
        }
        for &j in nb {
            let src = x.row(j as usize);
            for (o, &v) in row.iter_mut().zip(src.iter()) {
                match aggr {
                    Aggr::Max => *o = o.max(v),
                    Aggr::Mean | Aggr::Sum => *o += v,
                }
            }
        }
        if aggr == Aggr::Mean {
            let inv = nb.len() as f32;
            row.mapv_inplace(|v| v / inv);
        }
    }
    Ok(out)
}

/// Dense `x * w`.
pub fn combine(x: &Array2<f32>, w: &Array2<f32>) -> Result<Array2<f32>> {
    let (n, fin) = x.dim();
    let (wr, fout) = w.dim();
    if wr != fin {
        return Err(Error::Shape(format!("input width {fin} but weight has {wr} rows")));
    }
    let mut out = Array2::<f32>::zeros((n, fout));
    let ws = w.as_slice().expect("standard layout weights");
    for i in 0..n {
        let orow = out.row_mut(i).into_slice().expect("standard layout output");
        for (c, &a) in x.row(i).iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let wrow = &ws[c * fout..(c + 1) * fout];
            for (o, &b) in orow.iter_mut().zip(wrow) {
                *o += a * b;
            }
        }
    }
    Ok(out)
}

/// Column-wise maximum, giving a single row.
pub fn global_pool(x: &Array2<f32>) -> Result<Array2<f32>> {
    let (n, f) = x.dim();
    if n == 0 {
        return Err(Error::Shape("pooling over zero nodes".into()));
    }
    let mut out = Array2::<f32>::from_elem((1, f), f32::NEG_INFINITY);
    for row in x.rows() {
        for (o, &v) in out.row_mut(0).iter_mut().zip(row.iter()) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

/// Row-wise concatenation `[x | skip]`.
pub fn connect(x: &Array2<f32>, skip: &Array2<f32>) -> Result<Array2<f32>> {
    if x.nrows() != skip.nrows() {
        return Err(Error::Shape(format!("connect of {} and {} rows", x.nrows(), skip.nrows())));
    }
    let (n, a) = x.dim();
    let mut out = Array2::<f32>::zeros((n, a + skip.ncols()));
    out.slice_mut(s![.., ..a]).assign(x);
    out.slice_mut(s![.., a..]).assign(skip);
    Ok(out)
}

/// Weight matrix of the Combine at `layer`: uniform in `±1/sqrt(f_in)` from a
/// seed derived from `(seed, layer)`, or the rectangular identity in test mode.
pub fn combine_weights(seed: u64, layer: usize, f_in: usize, f_out: usize, identity: bool) -> Array2<f32> {
    if identity {
        return Array2::from_shape_fn((f_in, f_out), |(i, j)| if i == j { 1.0 } else { 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (layer as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let limit = 1.0 / (f_in.max(1) as f32).sqrt();
    Array2::from_shape_fn((f_in, f_out), |_| rng.gen_range(-limit..limit))
}

/// Seeded input point cloud of one batch, uniform in `[-1, 1)`.
pub fn synthetic_input(seed: u64, batch_id: u32, n: usize, f: usize) -> Array2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(u64::from(batch_id).wrapping_mul(0xa076_1d64_78bd_642f)));
    Array2::from_shape_fn((n, f), |_| rng.gen_range(-1.0f32..1.0))
}

/// Tensors carried between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ExecState {
    pub x: Array2<f32>,
    pub graph: Option<Knn>,
    /// Input of the most recent Combine, for Connect.
    pub skip: Option<Array2<f32>>,
}

impl ExecState {
    pub fn new(x: Array2<f32>) -> Self {
        ExecState { x, graph: None, skip: None }
    }
}

/// Applies one compute layer in place. `weights` is required for Combine.
pub fn run_kernel(layer: &Layer, state: &mut ExecState, active_k: usize, weights: Option<&Array2<f32>>) -> Result<()> {
    match *layer {
        Layer::Sample { .. } => state.graph = Some(knn(&state.x, active_k)?),
        Layer::Aggregate { aggr } => {
            let g = state.graph.as_ref().ok_or_else(|| Error::Shape("aggregate without a graph".into()))?;
            state.x = aggregate(&state.x, g, aggr)?;
        }
        Layer::Combine { out_dim } => {
            let w = weights.ok_or_else(|| Error::Precondition("combine needs weights".into()))?;
            if w.ncols() != out_dim as usize {
                return Err(Error::Shape(format!("weights give {} outputs, layer wants {out_dim}", w.ncols())));
            }
            let y = combine(&state.x, w)?;
            state.skip = Some(std::mem::replace(&mut state.x, y));
        }
        Layer::GlobalPooling => {
            state.x = global_pool(&state.x)?;
            state.graph = None;
            state.skip = None;
        }
        Layer::Connect => {
            let skip = state.skip.as_ref().ok_or_else(|| Error::Shape("connect without a skip tensor".into()))?;
            state.x = connect(&state.x, skip)?;
        }
        Layer::Communicate => return Err(Error::Precondition("communicate is not a kernel".into())),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn knn_on_a_line() {
        let x = array![[0.0f32], [1.0], [3.0]];
        assert_eq!(knn(&x, 1).unwrap().indices, vec![1, 0, 1]);
        assert_eq!(knn(&x, 2).unwrap().indices, vec![1, 2, 0, 2, 1, 0]);
        assert!(knn(&x, 3).is_err());
    }

    #[test]
    fn knn_ties_go_to_lower_index() {
        let x = array![[0.0f32], [-1.0], [1.0]];
        assert_eq!(knn(&x, 1).unwrap().neighbors(0), &[1]);
    }

    #[test]
    fn aggregate_reductions() {
        let x = array![[1.0f32, 2.0], [3.0, -4.0], [5.0, 0.0]];
        let g = Knn { k: 2, indices: vec![1, 2, 0, 2, 0, 1] };
        let max = aggregate(&x, &g, Aggr::Max).unwrap();
        assert_eq!(max.row(0).to_vec(), vec![5.0, 0.0]);
        let sum = aggregate(&x, &g, Aggr::Sum).unwrap();
        assert_eq!(sum.row(1).to_vec(), vec![6.0, 2.0]);
        let same = array![[7.0f32, 7.5], [7.0, 7.5], [7.0, 7.5]];
        let mean = aggregate(&same, &g, Aggr::Mean).unwrap();
        assert_eq!(mean, same);
    }

    #[test]
    fn identity_combine_and_pooling() {
        let x = synthetic_input(3, 0, 5, 4);
        let w = combine_weights(0, 0, 4, 4, true);
        assert_eq!(combine(&x, &w).unwrap(), x);
        let p = global_pool(&array![[1.0f32, -2.0], [0.5, 3.0]]).unwrap();
        assert_eq!(p, array![[1.0f32, 3.0]]);
        let c = connect(&array![[1.0f32]], &array![[2.0f32, 3.0]]).unwrap();
        assert_eq!(c, array![[1.0f32, 2.0, 3.0]]);
    }

    #[test]
    fn combine_matches_ndarray_dot() {
        let x = synthetic_input(1, 2, 7, 5);
        let w = combine_weights(9, 3, 5, 6, false);
        let d = x.dot(&w);
        let c = combine(&x, &w).unwrap();
        for (a, b) in c.iter().zip(d.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!(combine(&x, &combine_weights(9, 3, 4, 6, false)).is_err());
    }

    #[test]
    fn kernel_state_threading() {
        let mut st = ExecState::new(synthetic_input(0, 0, 8, 3));
        run_kernel(&Layer::Sample { k: 3 }, &mut st, 3, None).unwrap();
        run_kernel(&Layer::Aggregate { aggr: Aggr::Max }, &mut st, 3, None).unwrap();
        let w = combine_weights(0, 2, 3, 4, false);
        run_kernel(&Layer::Combine { out_dim: 4 }, &mut st, 0, Some(&w)).unwrap();
        run_kernel(&Layer::Connect, &mut st, 0, None).unwrap();
        assert_eq!(st.x.dim(), (8, 7));
        run_kernel(&Layer::GlobalPooling, &mut st, 0, None).unwrap();
        assert_eq!(st.x.dim(), (1, 7));
        assert!(run_kernel(&Layer::Aggregate { aggr: Aggr::Max }, &mut st, 3, None).is_err());
    }
}
