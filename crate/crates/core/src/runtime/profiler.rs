use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kernels::{combine_weights, run_kernel, synthetic_input, ExecState, Knn};
use crate::design_space::{Aggr, Layer, OpKind, OpShape};
use crate::error::{Error, Result};
use crate::profile::{BucketGrid, EndpointProfile, LutEntry, PerfLut, System, SystemConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub grid: BucketGrid,
    pub repetitions: usize,
    /// Untimed runs before the timed ones.
    pub warmup: usize,
    pub seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            grid: BucketGrid {
                n: vec![1, 16, 64, 256],
                f: vec![3, 16, 64, 128, 256],
                k: vec![4, 16],
                out_dim: vec![16, 64, 128, 256],
            },
            repetitions: 5,
            warmup: 1,
            seed: 0,
        }
    }
}

/// Identifies the host a measured table came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineFingerprint {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub hostname: String,
}

impl MachineFingerprint {
    pub fn current() -> Self {
        let hostname = std::fs::read_to_string("/etc/hostname")
            .ok()
            .or_else(|| std::env::var("HOSTNAME").ok())
            .or_else(|| std::env::var("COMPUTERNAME").ok())
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        MachineFingerprint {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            hostname,
        }
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub op: OpKind,
    pub shape: OpShape,
    pub median_s: f64,
    pub samples_s: Vec<f64>,
    /// The timer resolution exceeds 1% of the median.
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointMeasurements {
    pub machine: MachineFingerprint,
    pub timer_resolution_s: f64,
    pub measurements: Vec<Measurement>,
}

impl EndpointMeasurements {
    pub fn low_confidence(&self) -> usize {
        self.measurements.iter().filter(|m| m.low_confidence).count()
    }

    /// Entries for `profile`, with energy from its power curves at the measured times.
    pub fn lut_entries(&self, profile: &EndpointProfile) -> Vec<LutEntry> {
        self.measurements
            .iter()
            .map(|m| LutEntry {
                endpoint: profile.name.clone(),
                op: m.op,
                n: m.shape.n,
                f: m.shape.f,
                p: m.shape.p,
                latency_s: m.median_s,
                energy_j: m.median_s * profile.run_power(m.op, m.shape.f).expect("compute op"),
            })
            .collect()
    }

    /// A system whose device and edge both run at the measured speeds, as on loopback.
    pub fn system(&self, config: SystemConfig) -> Result<System> {
        let mut entries = self.lut_entries(&config.device);
        entries.extend(self.lut_entries(&config.edge));
        let lut = PerfLut::from_entries(format!("measured:{}", self.machine.hash()), entries)?;
        System::new(config, lut)
    }
}

/// Smallest nonzero step of the monotonic clock.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Inputs and layer that exercise `op` at `shape` through [`run_kernel`].
fn fixture(op: OpKind, shape: OpShape, seed: u64) -> (Layer, ExecState, usize, Option<ndarray::Array2<f32>>) {
    let (n, f, p) = (shape.n as usize, shape.f as usize, shape.p as usize);
    let x = synthetic_input(seed, 0, n, f);
    match op {
        OpKind::Sample => {
            let k = p.min(n.saturating_sub(1));
            (Layer::Sample { k: k as u32 }, ExecState::new(x), k, None)
        }
        OpKind::Aggregate => {
            let indices = (0..n).flat_map(|i| (0..p).map(move |j| ((i + j + 1) % n) as u32)).collect();
            let st = ExecState { x, graph: Some(Knn { k: p, indices }), skip: None };
            (Layer::Aggregate { aggr: Aggr::Max }, st, p, None)
        }
        OpKind::Combine => {
            let w = combine_weights(seed, 0, f, p, false);
            (Layer::Combine { out_dim: p as u32 }, ExecState::new(x), 0, Some(w))
        }
        OpKind::GlobalPooling => (Layer::GlobalPooling, ExecState::new(x), 0, None),
        OpKind::Connect => {
            let a = (f / 2).max(1);
            let st = ExecState {
                x: synthetic_input(seed, 0, n, a),
                graph: None,
                skip: Some(synthetic_input(seed, 1, n, f - a)),
            };
            (Layer::Connect, st, 0, None)
        }
        OpKind::Communicate => unreachable!("not a compute op"),
    }
}

/// Times every compute operation on every grid bucket with the local kernels.
pub fn profile_endpoint(cfg: &ProfileConfig) -> Result<EndpointMeasurements> {
    if cfg.warmup == 0 {
        return Err(Error::Precondition("profiling needs at least one warmup run".into()));
    }
    if cfg.repetitions == 0 {
        return Err(Error::Precondition("profiling needs at least one repetition".into()));
    }
    let resolution = timer_resolution().as_secs_f64();
    let mut measurements = Vec::new();
    for (op, shape) in cfg.grid.points() {
        if op == OpKind::Connect && shape.f < 2 {
            return Err(Error::Precondition("connect buckets need f >= 2".into()));
        }
        let (layer, state, k, w) = fixture(op, shape, cfg.seed);
        let mut samples = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.warmup + cfg.repetitions {
            let mut st = state.clone();
            let t = Instant::now();
            run_kernel(&layer, &mut st, k, w.as_ref())?;
            let dt = t.elapsed().as_secs_f64();
            std::hint::black_box(&st);
            if rep >= cfg.warmup {
                samples.push(dt.max(resolution));
            }
        }
        let median_s = median(&mut samples.clone());
        measurements.push(Measurement {
            op,
            shape,
            median_s,
            samples_s: samples,
            low_confidence: resolution > 0.01 * median_s,
        });
    }
    Ok(EndpointMeasurements {
        machine: MachineFingerprint::current(),
        timer_resolution_s: resolution,
        measurements,
    })
}
