use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of GIN layers.
pub const GIN_LAYERS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn init<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize, gain: f64) -> Self {
        let bound = gain * (6.0 / fan_in as f64).sqrt();
        Linear {
            w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound)),
            b: Array1::zeros(fan_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Linear {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    fn is_finite(&self) -> bool {
        self.w.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// All trainable parameters, in a fixed order: per GIN layer two linears, then the head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub linears: Vec<Linear>,
}

impl Params {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, in_width: usize, hidden: usize) -> Self {
        let mut linears = Vec::with_capacity(2 * GIN_LAYERS + 2);
        let mut width = in_width;
        for _ in 0..GIN_LAYERS {
            linears.push(Linear::init(rng, width, hidden, 1.0));
            linears.push(Linear::init(rng, hidden, hidden, 1.0));
            width = hidden;
        }
        linears.push(Linear::init(rng, hidden, hidden, 1.0));
        linears.push(Linear::init(rng, hidden, 1, 0.1));
        Params { linears }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            linears: self.linears.iter().map(Linear::zeros_like).collect(),
        }
    }

    pub fn in_width(&self) -> usize {
        self.linears[0].w.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.linears[0].w.ncols()
    }

    pub fn num_scalars(&self) -> usize {
        self.linears.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.linears.iter().all(Linear::is_finite)
    }

    /// Scalar `idx` in weight-then-bias order of every linear.
    pub fn scalar_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.linears {
            if idx < l.w.len() {
                return l.w.iter_mut().nth(idx).expect("in range");
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return &mut l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn scalars(&self) -> Vec<f64> {
        self.linears
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }
}

/// Concatenated node features of several graphs with their mean-aggregation operator.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub x: Array2<f64>,
    /// CSR rows of the mean operator: node `v` averages `cols[offsets[v]..offsets[v+1]]`.
    offsets: Vec<usize>,
    cols: Vec<usize>,
    /// First node of every graph, plus the total node count.
    graph_starts: Vec<usize>,
}

/// One graph: node features plus in-neighbour lists (self-loops included).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub x: Array2<f64>,
    pub in_neighbors: Vec<Vec<usize>>,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphInput]) -> Result<Self> {
        let width = graphs.first().map_or(0, |g| g.x.ncols());
        let total: usize = graphs.iter().map(|g| g.x.nrows()).sum();
        let mut x = Array2::zeros((total, width));
        let mut offsets = Vec::with_capacity(total + 1);
        let mut cols = Vec::new();
        let mut graph_starts = Vec::with_capacity(graphs.len() + 1);
        let mut start = 0;
        offsets.push(0);
        for g in graphs {
            if g.x.ncols() != width || g.in_neighbors.len() != g.x.nrows() {
                return Err(Error::Shape("inconsistent graph batch".into()));
            }
            graph_starts.push(start);
            let n = g.x.nrows();
            x.slice_mut(ndarray::s![start..start + n, ..]).assign(&g.x);
            for nb in &g.in_neighbors {
                cols.extend(nb.iter().map(|&u| u + start));
                offsets.push(cols.len());
            }
            start += n;
        }
        graph_starts.push(start);
        Ok(GraphBatch {
            x,
            offsets,
            cols,
            graph_starts,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.graph_starts.len() - 1
    }

    /// `h + mean over in-neighbours of h`.
    fn aggregate(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = h.clone();
        for v in 0..h.nrows() {
            let nb = &self.cols[self.offsets[v]..self.offsets[v + 1]];
            if nb.is_empty() {
                continue;
            }
            let inv = 1.0 / nb.len() as f64;
            let mut row = out.row_mut(v);
            for &u in nb {
                row.scaled_add(inv, &h.row(u));
            }
        }
        out
    }

    /// Adjoint of [`GraphBatch::aggregate`].
    fn aggregate_backward(&self, d: &Array2<f64>) -> Array2<f64> {
        let mut out = d.clone();
        for v in 0..d.nrows() {
            let nb = &self.cols[self.offsets[v]..self.offsets[v + 1]];
            if nb.is_empty() {
                continue;
            }
            let inv = 1.0 / nb.len() as f64;
            for &u in nb {
                let dv = d.row(v).to_owned();
                out.row_mut(u).scaled_add(inv, &dv);
            }
        }
        out
    }

    fn readout(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut s = Array2::zeros((self.num_graphs(), h.ncols()));
        for g in 0..self.num_graphs() {
            let rows = h.slice(ndarray::s![self.graph_starts[g]..self.graph_starts[g + 1], ..]);
            s.row_mut(g).assign(&rows.sum_axis(Axis(0)));
        }
        s
    }

    fn readout_backward(&self, ds: &Array2<f64>, nodes: usize) -> Array2<f64> {
        let mut dh = Array2::zeros((nodes, ds.ncols()));
        for g in 0..self.num_graphs() {
            for v in self.graph_starts[g]..self.graph_starts[g + 1] {
                dh.row_mut(v).assign(&ds.row(g));
            }
        }
        dh
    }
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

fn relu_backward(d: &Array2<f64>, z: &Array2<f64>) -> Array2<f64> {
    let mut out = d.clone();
    out.zip_mut_with(z, |g, &zv| {
        if zv <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

pub(crate) fn softplus(o: f64) -> f64 {
    if o > 30.0 {
        o
    } else {
        o.exp().ln_1p()
    }
}

fn sigmoid(o: f64) -> f64 {
    1.0 / (1.0 + (-o).exp())
}

/// Positive output map: `scale * (exp(softplus(o)) - 1)`.
pub(crate) fn output_map(o: f64, scale: f64) -> f64 {
    scale * softplus(o).exp_m1()
}

fn output_map_grad(o: f64, scale: f64) -> f64 {
    scale * softplus(o).exp() * sigmoid(o)
}

struct GinCache {
    a: Array2<f64>,
    z1: Array2<f64>,
    r1: Array2<f64>,
    z2: Array2<f64>,
}

pub(crate) struct ForwardCache {
    gin: Vec<GinCache>,
    s: Array2<f64>,
    z3: Array2<f64>,
    q: Array2<f64>,
    pub o: Array1<f64>,
}

pub(crate) fn forward(p: &Params, batch: &GraphBatch) -> Result<ForwardCache> {
    if batch.x.ncols() != p.in_width() {
        return Err(Error::Shape(format!(
            "feature width {} does not match model input width {}",
            batch.x.ncols(),
            p.in_width()
        )));
    }
    let mut h = batch.x.clone();
    let mut gin = Vec::with_capacity(GIN_LAYERS);
    for l in 0..GIN_LAYERS {
        let a = batch.aggregate(&h);
        let z1 = p.linears[2 * l].apply(&a);
        let r1 = relu(&z1);
        let z2 = p.linears[2 * l + 1].apply(&r1);
        h = relu(&z2);
        gin.push(GinCache { a, z1, r1, z2 });
    }
    let s = batch.readout(&h);
    let z3 = p.linears[2 * GIN_LAYERS].apply(&s);
    let q = relu(&z3);
    let o = p.linears[2 * GIN_LAYERS + 1].apply(&q).column(0).to_owned();
    Ok(ForwardCache { gin, s, z3, q, o })
}

fn linear_backward(lin: &Linear, grad: &mut Linear, input: &Array2<f64>, dz: &Array2<f64>) -> Array2<f64> {
    grad.w += &input.t().dot(dz);
    grad.b += &dz.sum_axis(Axis(0));
    dz.dot(&lin.w.t())
}

/// Accumulates parameter gradients for upstream gradient `d_o` on the raw head outputs.
pub(crate) fn backward(p: &Params, batch: &GraphBatch, cache: &ForwardCache, d_o: &Array1<f64>, grads: &mut Params) {
    let head = 2 * GIN_LAYERS;
    let d_o = d_o.view().insert_axis(Axis(1)).to_owned();
    let dq = linear_backward(&p.linears[head + 1], &mut grads.linears[head + 1], &cache.q, &d_o);
    let dz3 = relu_backward(&dq, &cache.z3);
    let ds = linear_backward(&p.linears[head], &mut grads.linears[head], &cache.s, &dz3);
    let mut dh = batch.readout_backward(&ds, batch.x.nrows());
    for l in (0..GIN_LAYERS).rev() {
        let c = &cache.gin[l];
        let dz2 = relu_backward(&dh, &c.z2);
        let dr1 = linear_backward(&p.linears[2 * l + 1], &mut grads.linears[2 * l + 1], &c.r1, &dz2);
        let dz1 = relu_backward(&dr1, &c.z1);
        let da = linear_backward(&p.linears[2 * l], &mut grads.linears[2 * l], &c.a, &dz1);
        if l > 0 {
            dh = batch.aggregate_backward(&da);
        }
    }
}

/// Mean absolute percentage error of the batch and its gradient on the head outputs.
pub(crate) fn mape_and_grad(o: &Array1<f64>, y: &[f64], scale: f64) -> (f64, Array1<f64>) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array1::zeros(o.len());
    for (i, (&oi, &yi)) in o.iter().zip(y).enumerate() {
        let pred = output_map(oi, scale);
        let diff = pred - yi;
        loss += diff.abs() / yi;
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad[i] = sign / (yi * n) * output_map_grad(oi, scale);
    }
    (loss / n, grad)
}

/// Loss and analytic gradient of `params` on `batch` with labels `y`.
pub(crate) fn loss_and_grad(p: &Params, batch: &GraphBatch, y: &[f64], scale: f64) -> Result<(f64, Params)> {
    let cache = forward(p, batch)?;
    let (loss, d_o) = mape_and_grad(&cache.o, y, scale);
    let mut grads = p.zeros_like();
    backward(p, batch, &cache, &d_o, &mut grads);
    Ok((loss, grads))
}

/// Max relative error between analytic and central-difference gradients over every parameter.
pub(crate) fn gradient_check(p: &Params, batch: &GraphBatch, y: &[f64], scale: f64) -> Result<f64> {
    const H: f64 = 1e-5;
    let (_, grads) = loss_and_grad(p, batch, y, scale)?;
    let analytic = grads.scalars();
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.scalar_mut(i);
        *probe.scalar_mut(i) = orig + H;
        let up = mape_and_grad(&forward(&probe, batch)?.o, y, scale).0;
        *probe.scalar_mut(i) = orig - H;
        let down = mape_and_grad(&forward(&probe, batch)?.o, y, scale).0;
        *probe.scalar_mut(i) = orig;
        let numeric = (up - down) / (2.0 * H);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_node_graph(x: Array2<f64>) -> GraphInput {
        GraphInput {
            x,
            in_neighbors: vec![vec![0, 1], vec![1, 0]],
        }
    }

    fn identity(n: usize) -> Linear {
        Linear {
            w: Array2::eye(n),
            b: Array1::zeros(n),
        }
    }

    #[test]
    fn hand_set_two_node_forward() {
        // every GIN linear is the 2x2 identity, head sums the two channels
        let mut linears = vec![identity(2); 2 * GIN_LAYERS + 1];
        linears.push(Linear {
            w: array![[1.0], [1.0]],
            b: array![0.5],
        });
        let p = Params { linears };
        let g = two_node_graph(array![[1.0, 0.0], [0.0, 2.0]]);
        let batch = GraphBatch::new(&[&g]).unwrap();
        let o = forward(&p, &batch).unwrap().o[0];
        // Each layer maps h -> h + mean(h_0, h_1); with both nodes averaging
        // both rows the mean m is shared, so h_v' = h_v + m and m' = 2m.
        // Start m = (0.5, 1.0). Layer 1: rows (1.5,1),(0.5,3), m=(1,2).
        // Layer 2: (2.5,3),(1.5,5), m=(2,4). Layer 3: (4.5,7),(3.5,9).
        // Readout (8,16), head 8+16+0.5.
        assert!((o - 24.5).abs() < 1e-9);
        let y = output_map(o, 2.0);
        assert!((y - 2.0 * (softplus(24.5).exp() - 1.0)).abs() < 1e-9 * y);
    }

    #[test]
    fn zero_features_give_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Params::new(&mut rng, 8, 16);
        for n in [2usize, 5] {
            let g = GraphInput {
                x: Array2::zeros((n, 8)),
                in_neighbors: (0..n).map(|v| vec![v, (v + 1) % n]).collect(),
            };
            let batch = GraphBatch::new(&[&g]).unwrap();
            let o = forward(&p, &batch).unwrap().o[0];
            assert_eq!(o, 0.0);
            assert!((output_map(o, 3.0) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Params::new(&mut rng, 8, 4);
        let g = two_node_graph(Array2::zeros((2, 7)));
        let batch = GraphBatch::new(&[&g]).unwrap();
        assert!(matches!(forward(&p, &batch), Err(Error::Shape(_))));
    }

    #[test]
    fn duplicated_neighbours_leave_mean_unchanged() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let once = GraphInput {
            x: x.clone(),
            in_neighbors: vec![vec![0, 1, 2], vec![1], vec![2]],
        };
        let twice = GraphInput {
            x,
            in_neighbors: vec![vec![0, 1, 2, 0, 1, 2], vec![1], vec![2]],
        };
        let a = GraphBatch::new(&[&once]).unwrap();
        let b = GraphBatch::new(&[&twice]).unwrap();
        let ha = a.aggregate(&a.x);
        let hb = b.aggregate(&b.x);
        for (u, v) in ha.iter().zip(hb.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Params::new(&mut rng, 3, 5);
        let g1 = GraphInput {
            x: Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0)),
            in_neighbors: vec![vec![0, 3], vec![0, 1, 3], vec![1, 2, 3], vec![0, 1, 2, 3]],
        };
        let g2 = two_node_graph(Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0)));
        let batch = GraphBatch::new(&[&g1, &g2]).unwrap();
        let err = gradient_check(&p, &batch, &[0.7, 2.5], 1.3).unwrap();
        assert!(err < 1e-4, "{err}");
        assert_eq!(err, gradient_check(&p, &batch, &[0.7, 2.5], 1.3).unwrap());
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Params::new(&mut rng, 3, 4);
        let mut x = Array2::from_shape_fn((2, 3), |_| rng.gen_range(0.1..1.0));
        x.column_mut(1).fill(0.0);
        let g = two_node_graph(x);
        let batch = GraphBatch::new(&[&g]).unwrap();
        let (_, grads) = loss_and_grad(&p, &batch, &[1.0], 1.0).unwrap();
        assert!(grads.linears[0].w.row(1).iter().all(|&v| v == 0.0));
    }
}
