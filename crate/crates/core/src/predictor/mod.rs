//! Graph-isomorphism-network regressors for latency and device energy.
//!
//! Three GIN layers with mean neighbour aggregation feed a summed readout and
//! a two-layer head. The head output `o` becomes a positive prediction through
//! `scale * (exp(softplus(o)) - 1)`, so `softplus(o)` plays the role of
//! `ln(1 + y / scale)` and predictions stay positive across several decades.
//! Gradients are derived by hand and checked against finite differences.

mod model;

use std::path::Path;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arch_graph::{build_graph, features, FeatureKind};
use crate::cosim::{lut_estimate, DatasetRecord};
use crate::design_space::{derive_mapping, Architecture};
use crate::error::{Error, Result};
use crate::profile::System;

pub use model::{GraphBatch, GraphInput, Linear, Params, GIN_LAYERS};

/// Version written into model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Pairs drawn for the ranking accuracy.
pub const RANKING_PAIRS: usize = 10_000;
const RANKING_SEED: u64 = 0x5eed_2a4c;
const EVAL_CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Latency,
    Energy,
}

impl Metric {
    pub fn label(self, r: &DatasetRecord) -> f64 {
        match self {
            Metric::Latency => r.latency_s,
            Metric::Energy => r.energy_j,
        }
    }

    /// Enhanced features matching the metric.
    pub fn features(self) -> FeatureKind {
        match self {
            Metric::Latency => FeatureKind::Latency,
            Metric::Energy => FeatureKind::Energy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs over which the step size ramps linearly up to `learning_rate`.
    pub warmup_epochs: usize,
    /// After warmup, anneal the step size to zero along a half cosine.
    pub cosine_decay: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hidden: 64,
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            warmup_epochs: 5,
            cosine_decay: true,
            seed: 0,
        }
    }
}

/// A graph with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub graph: GraphInput,
    pub label: f64,
}

pub fn graph_input(arch: &Architecture, sys: &System, kind: FeatureKind) -> Result<GraphInput> {
    let graph = build_graph(arch)?;
    let mapping = derive_mapping(arch)?;
    let x = features(kind, &graph, arch, &mapping, sys)?;
    Ok(GraphInput {
        x,
        in_neighbors: graph.in_neighbors(),
    })
}

/// Builds graphs and features for labelled records; zero or negative labels are rejected.
pub fn prepare_samples(records: &[DatasetRecord], sys: &System, metric: Metric, kind: FeatureKind) -> Result<Vec<Sample>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let label = metric.label(r);
            if !(label > 0.0) || !label.is_finite() {
                return Err(Error::Training(format!("record {i} has non-positive label {label}")));
            }
            Ok(Sample {
                graph: graph_input(&r.arch, sys, kind)?,
                label,
            })
        })
        .collect()
}

/// Hash of the records a model was trained on.
pub fn dataset_fingerprint(records: &[DatasetRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_vec(r).expect("serializable"));
        h.update(b"\n");
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub dataset_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub version: u32,
    pub metric: Metric,
    pub features: FeatureKind,
    /// Geometric mean of the training labels.
    pub scale: f64,
    pub params: Params,
    pub meta: TrainMeta,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub mape: f64,
    pub within_10: f64,
    pub within_20: f64,
    pub ranking: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_mape: f64,
    pub val: Accuracy,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &Params) -> Self {
        Adam {
            m: p.zeros_like(),
            v: p.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, p: &mut Params, g: &Params, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((pl, ml), vl), gl) in p.linears.iter_mut().zip(&mut self.m.linears).zip(&mut self.v.linears).zip(&g.linears) {
            ndarray::Zip::from(&mut pl.w)
                .and(&mut ml.w)
                .and(&mut vl.w)
                .and(&gl.w)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut pl.b)
                .and(&mut ml.b)
                .and(&mut vl.b)
                .and(&gl.b)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v.ln(), n + 1));
    (sum / n as f64).exp()
}

/// Trains a predictor with MAPE loss and Adam; deterministic under `hp.seed`.
pub fn train(
    train: &[Sample],
    val: &[Sample],
    metric: Metric,
    kind: FeatureKind,
    hp: &Hyperparams,
    dataset_fingerprint: String,
) -> Result<(Predictor, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if hp.batch_size == 0 || hp.hidden == 0 {
        return Err(Error::Training("batch size and hidden width must be >= 1".into()));
    }
    if let Some(s) = train.iter().chain(val).find(|s| !(s.label > 0.0)) {
        return Err(Error::Training(format!("non-positive label {}", s.label)));
    }
    let width = kind.width();
    if let Some(s) = train.iter().chain(val).find(|s| s.graph.x.ncols() != width) {
        return Err(Error::Shape(format!("sample width {} but features need {width}", s.graph.x.ncols())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut params = Params::new(&mut rng, width, hp.hidden);
    let scale = geometric_mean(train.iter().map(|s| s.label));
    let mut adam = Adam::new(&params);
    let steps_per_epoch = train.len().div_ceil(hp.batch_size);
    let warmup_steps = (hp.warmup_epochs * steps_per_epoch).max(1) as f64;
    let total_steps = (hp.epochs * steps_per_epoch) as f64;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let graphs: Vec<&GraphInput> = chunk.iter().map(|&i| &train[i].graph).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| train[i].label).collect();
            let batch = GraphBatch::new(&graphs)?;
            let (loss, grads) = model::loss_and_grad(&params, &batch, &labels, scale)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite loss {loss} in epoch {epoch}")));
            }
            total += loss * chunk.len() as f64;
            let t = (adam.t + 1) as f64;
            let mut lr = hp.learning_rate * (t / warmup_steps).min(1.0);
            if hp.cosine_decay && t > warmup_steps {
                let progress = (t - warmup_steps) / (total_steps - warmup_steps).max(1.0);
                lr *= 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            }
            adam.step(&mut params, &grads, lr);
        }
        if !params.is_finite() {
            return Err(Error::Training(format!("non-finite parameters after epoch {epoch}")));
        }
        history.push(total / train.len() as f64);
        log::debug!("epoch {epoch}: train mape {:.5}", history[epoch]);
    }
    let predictor = Predictor {
        version: MODEL_FORMAT_VERSION,
        metric,
        features: kind,
        scale,
        params,
        meta: TrainMeta {
            epochs: hp.epochs,
            seed: hp.seed,
            hidden: hp.hidden,
            dataset_fingerprint,
        },
    };
    let train_mape = predictor.evaluate(train)?.mape;
    let val = if val.is_empty() {
        Accuracy::default()
    } else {
        predictor.evaluate(val)?
    };
    Ok((
        predictor,
        TrainReport {
            train_mape,
            val,
            history,
        },
    ))
}

/// Within-bound and pairwise-ranking accuracies of `pred` against `truth`.
pub fn accuracy(pred: &[f64], truth: &[f64]) -> Accuracy {
    let n = truth.len();
    if n == 0 {
        return Accuracy::default();
    }
    let rel: Vec<f64> = pred.iter().zip(truth).map(|(p, y)| (p - y).abs() / y).collect();
    let within = |k: f64| rel.iter().filter(|&&r| r <= k + 1e-12).count() as f64 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(RANKING_SEED);
    let (mut agree, mut counted) = (0usize, 0usize);
    if n >= 2 {
        for _ in 0..RANKING_PAIRS {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if truth[i] == truth[j] {
                continue;
            }
            counted += 1;
            if (pred[i] - pred[j]).signum() == (truth[i] - truth[j]).signum() && pred[i] != pred[j] {
                agree += 1;
            }
        }
    }
    Accuracy {
        mape: rel.iter().sum::<f64>() / n as f64,
        within_10: within(0.10),
        within_20: within(0.20),
        ranking: if counted == 0 { 1.0 } else { agree as f64 / counted as f64 },
    }
}

impl Predictor {
    pub fn predict_graphs(&self, graphs: &[&GraphInput]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(EVAL_CHUNK) {
            let batch = GraphBatch::new(chunk)?;
            let o: Array1<f64> = model::forward(&self.params, &batch)?.o;
            out.extend(o.iter().map(|&v| model::output_map(v, self.scale)));
        }
        Ok(out)
    }

    pub fn predict(&self, arch: &Architecture, sys: &System) -> Result<f64> {
        let g = graph_input(arch, sys, self.features)?;
        Ok(self.predict_graphs(&[&g])?[0])
    }

    pub fn predict_many(&self, archs: &[Architecture], sys: &System) -> Result<Vec<f64>> {
        let graphs = archs
            .iter()
            .map(|a| graph_input(a, sys, self.features))
            .collect::<Result<Vec<_>>>()?;
        self.predict_graphs(&graphs.iter().collect::<Vec<_>>())
    }

    pub fn evaluate(&self, samples: &[Sample]) -> Result<Accuracy> {
        let graphs: Vec<&GraphInput> = samples.iter().map(|s| &s.graph).collect();
        let pred = self.predict_graphs(&graphs)?;
        let truth: Vec<f64> = samples.iter().map(|s| s.label).collect();
        Ok(accuracy(&pred, &truth))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    /// Loads a model file and checks it against the expected feature kind.
    pub fn load(path: &Path, expect: Option<FeatureKind>) -> Result<Self> {
        let model: Predictor = serde_json::from_slice(&std::fs::read(path)?)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", model.version)));
        }
        if model.params.in_width() != model.features.width() {
            return Err(Error::Shape(format!(
                "model input width {} does not match {:?} features",
                model.params.in_width(),
                model.features
            )));
        }
        if let Some(kind) = expect {
            if kind.width() != model.features.width() {
                return Err(Error::Shape(format!(
                    "model expects {} features, caller provides {}",
                    model.features.width(),
                    kind.width()
                )));
            }
        }
        Ok(model)
    }
}

/// Latency prediction floored at the lookup-table estimate.
pub fn predict_corrected(model: &Predictor, arch: &Architecture, sys: &System) -> Result<f64> {
    if model.metric != Metric::Latency {
        return Err(Error::Precondition("lower-bound correction applies to latency models only".into()));
    }
    Ok(correct(model.predict(arch, sys)?, lut_estimate(arch, sys)?))
}

pub fn correct(predicted: f64, lut_bound: f64) -> f64 {
    predicted.max(lut_bound)
}

/// Max relative error of analytic against central-difference gradients of the MAPE loss.
pub fn gradient_check(params: &Params, sample: &Sample, scale: f64) -> Result<f64> {
    let batch = GraphBatch::new(&[&sample.graph])?;
    model::gradient_check(params, &batch, &[sample.label], scale)
}

/// MAPE loss of `params` on one sample and its analytic gradient.
pub fn loss_gradient(params: &Params, sample: &Sample, scale: f64) -> Result<(f64, Params)> {
    let batch = GraphBatch::new(&[&sample.graph])?;
    model::loss_and_grad(params, &batch, &[sample.label], scale)
}

/// A freshly initialised parameter set, as used at the start of training.
pub fn init_params(seed: u64, in_width: usize, hidden: usize) -> Params {
    Params::new(&mut ChaCha8Rng::seed_from_u64(seed), in_width, hidden)
}
