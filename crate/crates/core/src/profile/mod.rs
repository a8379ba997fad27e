//! Endpoint and network models, the per-operation lookup table and the
//! shipped profile packs.

mod lut;
mod packs;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design_space::{OpKind, OpShape, Side};
use crate::error::{Error, Result};

pub use lut::{build_lut, BucketGrid, ColumnStats, LutEntry, NormStats, OpPerf, PerfLut};
pub use packs::{builtin_pack, BUILTIN_PACKS};

/// Seconds per unit of work for each compute kind (see [`EndpointProfile::op_latency`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCoefficients {
    pub sample: f64,
    pub aggregate: f64,
    pub combine: f64,
    pub global_pooling: f64,
    pub connect: f64,
}

/// Run power that moves linearly with feature width between two calibration
/// points and stays flat outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub f_lo: f64,
    pub p_lo: f64,
    pub f_hi: f64,
    pub p_hi: f64,
}

impl PowerCurve {
    pub fn at(&self, f: f64) -> f64 {
        if self.f_hi <= self.f_lo {
            return self.p_lo;
        }
        let t = ((f - self.f_lo) / (self.f_hi - self.f_lo)).clamp(0.0, 1.0);
        self.p_lo + t * (self.p_hi - self.p_lo)
    }

    fn min(&self) -> f64 {
        self.p_lo.min(self.p_hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub sample: PowerCurve,
    pub aggregate: PowerCurve,
    pub combine: PowerCurve,
    pub global_pooling: PowerCurve,
    pub connect: PowerCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointProfile {
    pub name: String,
    /// Relative speed; every cost is divided by it.
    pub throughput: f64,
    pub cost: CostCoefficients,
    pub power: PowerTable,
    pub idle_power_w: f64,
    pub comm_power_w: f64,
}

impl EndpointProfile {
    pub fn coefficient(&self, op: OpKind) -> Option<f64> {
        let c = &self.cost;
        match op {
            OpKind::Sample => Some(c.sample),
            OpKind::Aggregate => Some(c.aggregate),
            OpKind::Combine => Some(c.combine),
            OpKind::GlobalPooling => Some(c.global_pooling),
            OpKind::Connect => Some(c.connect),
            OpKind::Communicate => None,
        }
    }

    pub fn power_curve(&self, op: OpKind) -> Option<&PowerCurve> {
        let p = &self.power;
        match op {
            OpKind::Sample => Some(&p.sample),
            OpKind::Aggregate => Some(&p.aggregate),
            OpKind::Combine => Some(&p.combine),
            OpKind::GlobalPooling => Some(&p.global_pooling),
            OpKind::Connect => Some(&p.connect),
            OpKind::Communicate => None,
        }
    }

    /// Analytic latency of one operation.
    ///
    /// Work is `N^2 F` for k-NN sampling, `N k F` for aggregation,
    /// `N F_in F_out` for combine and `N F` for pooling and connect.
    pub fn op_latency(&self, op: OpKind, shape: OpShape) -> Option<f64> {
        let (n, f, p) = (f64::from(shape.n), f64::from(shape.f), f64::from(shape.p));
        let work = match op {
            OpKind::Sample => n * n * f,
            OpKind::Aggregate | OpKind::Combine => n * p * f,
            OpKind::GlobalPooling | OpKind::Connect => n * f,
            OpKind::Communicate => return None,
        };
        Some(self.coefficient(op)? * work / self.throughput)
    }

    pub fn run_power(&self, op: OpKind, feature_dim: u32) -> Option<f64> {
        Some(self.power_curve(op)?.at(f64::from(feature_dim)))
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !(self.throughput > 0.0) {
            return Err(Error::config(format!("{name}: throughput must be > 0")));
        }
        if !(self.idle_power_w > 0.0) || !(self.comm_power_w > 0.0) {
            return Err(Error::config(format!("{name}: powers must be > 0")));
        }
        if self.comm_power_w < self.idle_power_w {
            return Err(Error::config(format!("{name}: comm power below idle power")));
        }
        for op in OpKind::COMPUTE {
            let c = self.coefficient(op).unwrap_or(0.0);
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::config(format!("{name}: bad cost coefficient for {op}")));
            }
            let curve = self.power_curve(op).expect("compute op has a power curve");
            if !(curve.min() > 0.0) {
                return Err(Error::config(format!("{name}: run power for {op} must be > 0")));
            }
            if curve.min() < self.idle_power_w {
                return Err(Error::config(format!("{name}: run power for {op} below idle power")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub bandwidth_bps: f64,
    /// Fixed per-message cost (serialization, compression, syscalls).
    pub per_message_overhead_s: f64,
    /// Expected compressed/raw size ratio, in (0, 1].
    pub compression_ratio: f64,
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_bps > 0.0) {
            return Err(Error::config("bandwidth must be > 0"));
        }
        if !(self.per_message_overhead_s >= 0.0) {
            return Err(Error::config("per-message overhead must be >= 0"));
        }
        if !(self.compression_ratio > 0.0 && self.compression_ratio <= 1.0) {
            return Err(Error::config("compression ratio must be in (0, 1]"));
        }
        Ok(())
    }

    /// Wire time of `bytes` once compressed, excluding the per-message overhead.
    pub fn transfer_time(&self, bytes: u64) -> f64 {
        bytes as f64 * self.compression_ratio * 8.0 / self.bandwidth_bps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub latency_s: f64,
    pub energy_j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub latency: f64,
    pub energy: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            latency: 1.0,
            energy: 1.0,
        }
    }
}

/// A device-edge pair, the link between them and the user requirements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub name: String,
    pub device: EndpointProfile,
    pub edge: EndpointProfile,
    pub network: NetworkModel,
    pub constraints: Constraints,
    pub lambda: f64,
    #[serde(default)]
    pub weights: ObjectiveWeights,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.edge.validate()?;
        if self.device.name == self.edge.name {
            return Err(Error::config("device and edge profiles need distinct names"));
        }
        self.network.validate()?;
        if !(self.constraints.latency_s > 0.0) || !(self.constraints.energy_j > 0.0) {
            return Err(Error::config("constraints must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda must be >= 0"));
        }
        Ok(())
    }

    pub fn endpoint(&self, side: Side) -> &EndpointProfile {
        match side {
            Side::Device => &self.device,
            Side::Edge => &self.edge,
        }
    }

    /// Loads a profile pack from a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str::<SystemConfig>(&text)?,
            _ => toml::from_str::<SystemConfig>(&text).map_err(|e| Error::Toml(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hash of the two endpoint profiles; network and requirements excluded.
    pub fn pack_fingerprint(&self) -> String {
        let json = serde_json::to_string(&(&self.device, &self.edge)).expect("serializable");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Pack hash plus bandwidth and constraints: the key of zoo sections.
    pub fn fingerprint(&self) -> String {
        let key = format!(
            "{}|{:e}|{:e}|{:e}",
            self.pack_fingerprint(),
            self.network.bandwidth_bps,
            self.constraints.latency_s,
            self.constraints.energy_j
        );
        hex::encode(&Sha256::digest(key.as_bytes())[..8])
    }

    pub fn with_bandwidth(mut self, bps: f64) -> Self {
        self.network.bandwidth_bps = bps;
        self
    }
}

/// A system configuration with its lookup table, ready for evaluation.
#[derive(Clone, Debug)]
pub struct System {
    pub config: SystemConfig,
    pub lut: PerfLut,
}

impl System {
    pub fn new(config: SystemConfig, lut: PerfLut) -> Result<Self> {
        config.validate()?;
        for p in [&config.device, &config.edge] {
            if !lut.has_endpoint(&p.name) {
                return Err(Error::UnknownEndpoint(p.name.clone()));
            }
        }
        Ok(System { config, lut })
    }

    /// Builds the lookup table analytically from the endpoint cost models.
    pub fn analytic(config: SystemConfig, grid: &BucketGrid) -> Result<Self> {
        config.validate()?;
        let lut = build_lut(&[&config.device, &config.edge], grid)?;
        System::new(config, lut)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        System::analytic(builtin_pack(name)?, &BucketGrid::default())
    }

    pub fn endpoint_name(&self, side: Side) -> &str {
        &self.config.endpoint(side).name
    }

    pub fn op_perf(&self, op: OpKind, shape: OpShape, side: Side) -> Result<OpPerf> {
        self.lut.lookup(op, shape, self.endpoint_name(side))
    }

    /// Same system under a different network or requirement setting.
    pub fn with_config(&self, config: SystemConfig) -> Result<Self> {
        System::new(config, self.lut.clone())
    }
}
