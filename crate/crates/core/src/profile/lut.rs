use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EndpointProfile;
use crate::design_space::{OpKind, OpShape};
use crate::error::{Error, Result};

/// Geometric bucket grid of the lookup table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketGrid {
    pub n: Vec<u32>,
    pub f: Vec<u32>,
    /// Neighbour counts for `Sample` and `Aggregate`.
    pub k: Vec<u32>,
    /// Output widths for `Combine`.
    pub out_dim: Vec<u32>,
}

impl Default for BucketGrid {
    fn default() -> Self {
        BucketGrid {
            n: vec![1, 17, 128, 1024],
            f: vec![3, 64, 128, 256, 300, 512, 1024],
            k: vec![10, 20],
            out_dim: vec![40, 64, 128, 256],
        }
    }
}

impl BucketGrid {
    fn validate(&self) -> Result<()> {
        for (name, axis) in [("n", &self.n), ("f", &self.f), ("k", &self.k), ("out_dim", &self.out_dim)] {
            if axis.is_empty() {
                return Err(Error::config(format!("bucket grid axis `{name}` is empty")));
            }
            if axis.contains(&0) {
                return Err(Error::config(format!("bucket grid axis `{name}` contains 0")));
            }
        }
        Ok(())
    }

    fn p_axis(&self, op: OpKind) -> Vec<u32> {
        match op {
            OpKind::Sample | OpKind::Aggregate => self.k.clone(),
            OpKind::Combine => self.out_dim.clone(),
            _ => vec![1],
        }
    }

    /// Every `(op, shape)` bucket point, compute kinds only.
    pub fn points(&self) -> Vec<(OpKind, OpShape)> {
        let mut out = Vec::new();
        for op in OpKind::COMPUTE {
            for &n in &self.n {
                for &f in &self.f {
                    for p in self.p_axis(op) {
                        out.push((op, OpShape { n, f, p }));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpPerf {
    pub latency_s: f64,
    pub energy_j: f64,
}

/// One stored measurement or model evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub endpoint: String,
    pub op: OpKind,
    pub n: u32,
    pub f: u32,
    pub p: u32,
    pub latency_s: f64,
    pub energy_j: f64,
}

/// Population mean and standard deviation of one metric column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

impl ColumnStats {
    /// `std` falls back to 1 when the column is constant.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return ColumnStats { mean: 0.0, std: 1.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let std = if std > 0.0 && std.is_finite() { std } else { 1.0 };
        ColumnStats { mean, std }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub latency: ColumnStats,
    pub energy: ColumnStats,
}

/// Dense `(n, f, p)` table for one operation on one endpoint.
#[derive(Clone, Debug, PartialEq)]
struct OpTable {
    n: Vec<u32>,
    f: Vec<u32>,
    p: Vec<u32>,
    latency: Vec<f64>,
    energy: Vec<f64>,
}

impl OpTable {
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.f.len() + j) * self.p.len() + k
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LutFile {
    source: String,
    entries: Vec<LutEntry>,
    norm_stats: NormStats,
}

/// Per-operation, per-endpoint latency and energy with normalization statistics.
///
/// Queries between buckets interpolate `ln(value)` multilinearly over
/// `(ln n, ln f, ln p)`, which is exact for power-law costs; bucket points
/// return the stored value unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LutFile", into = "LutFile")]
pub struct PerfLut {
    /// `analytic` or `measured:<machine fingerprint>`.
    pub source: String,
    tables: BTreeMap<String, BTreeMap<OpKind, OpTable>>,
    pub norm_stats: NormStats,
}

impl From<PerfLut> for LutFile {
    fn from(lut: PerfLut) -> Self {
        LutFile {
            source: lut.source.clone(),
            entries: lut.entries(),
            norm_stats: lut.norm_stats,
        }
    }
}

impl TryFrom<LutFile> for PerfLut {
    type Error = Error;

    fn try_from(file: LutFile) -> Result<Self> {
        let mut lut = PerfLut::from_entries(file.source, file.entries)?;
        lut.norm_stats = file.norm_stats;
        Ok(lut)
    }
}

fn sorted_unique(values: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut v: Vec<u32> = values.collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Bracketing buckets of `q` on `axis` and the log-space weight of the upper one.
fn bracket(axis: &[u32], q: u32) -> (usize, usize, f64) {
    if axis.len() == 1 {
        return (0, 0, 0.0);
    }
    if let Ok(i) = axis.binary_search(&q) {
        return (i, i, 0.0);
    }
    let pos = axis.partition_point(|&a| a < q);
    let (lo, hi) = if pos == 0 {
        (0, 1)
    } else if pos >= axis.len() {
        (axis.len() - 2, axis.len() - 1)
    } else {
        (pos - 1, pos)
    };
    let (a, b) = (f64::from(axis[lo]).ln(), f64::from(axis[hi]).ln());
    (lo, hi, (f64::from(q).ln() - a) / (b - a))
}

impl PerfLut {
    /// Assembles a table from entries; every `(endpoint, op)` must cover a full grid.
    pub fn from_entries(source: String, entries: Vec<LutEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("lookup table has no entries"));
        }
        let mut grouped: BTreeMap<(String, OpKind), Vec<&LutEntry>> = BTreeMap::new();
        for e in &entries {
            if e.op == OpKind::Communicate {
                return Err(Error::config("communicate costs are not stored in the lookup table"));
            }
            if !(e.latency_s > 0.0) || !(e.energy_j >= 0.0) || !e.latency_s.is_finite() {
                return Err(Error::config(format!("bad lookup entry {e:?}")));
            }
            grouped.entry((e.endpoint.clone(), e.op)).or_default().push(e);
        }
        let mut tables: BTreeMap<String, BTreeMap<OpKind, OpTable>> = BTreeMap::new();
        for ((endpoint, op), group) in grouped {
            let n = sorted_unique(group.iter().map(|e| e.n));
            let f = sorted_unique(group.iter().map(|e| e.f));
            let p = sorted_unique(group.iter().map(|e| e.p));
            let size = n.len() * f.len() * p.len();
            let mut table = OpTable {
                n,
                f,
                p,
                latency: vec![f64::NAN; size],
                energy: vec![f64::NAN; size],
            };
            for e in group {
                let i = table.n.binary_search(&e.n).expect("axis built from entries");
                let j = table.f.binary_search(&e.f).expect("axis built from entries");
                let k = table.p.binary_search(&e.p).expect("axis built from entries");
                let at = table.idx(i, j, k);
                table.latency[at] = e.latency_s;
                table.energy[at] = e.energy_j;
            }
            if table.latency.iter().any(|v| v.is_nan()) {
                return Err(Error::config(format!(
                    "lookup entries for {op} on `{endpoint}` do not cover a full grid"
                )));
            }
            tables.entry(endpoint).or_default().insert(op, table);
        }
        let mut lut = PerfLut {
            source,
            tables,
            norm_stats: NormStats {
                latency: ColumnStats { mean: 0.0, std: 1.0 },
                energy: ColumnStats { mean: 0.0, std: 1.0 },
            },
        };
        lut.recompute_stats();
        Ok(lut)
    }

    /// z-score statistics over all latency entries and all energy entries, jointly across endpoints.
    pub fn recompute_stats(&mut self) {
        let tables = self.tables.values().flat_map(|m| m.values());
        let lat: Vec<f64> = tables.clone().flat_map(|t| t.latency.iter().copied()).collect();
        let en: Vec<f64> = tables.flat_map(|t| t.energy.iter().copied()).collect();
        self.norm_stats = NormStats {
            latency: ColumnStats::from_values(lat),
            energy: ColumnStats::from_values(en),
        };
    }

    pub fn entries(&self) -> Vec<LutEntry> {
        let mut out = Vec::new();
        for (endpoint, ops) in &self.tables {
            for (&op, t) in ops {
                for (i, &n) in t.n.iter().enumerate() {
                    for (j, &f) in t.f.iter().enumerate() {
                        for (k, &p) in t.p.iter().enumerate() {
                            let at = t.idx(i, j, k);
                            out.push(LutEntry {
                                endpoint: endpoint.clone(),
                                op,
                                n,
                                f,
                                p,
                                latency_s: t.latency[at],
                                energy_j: t.energy[at],
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tables
            .values()
            .flat_map(|m| m.values())
            .map(|t| t.latency.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_endpoint(&self, endpoint: &str) -> bool {
        self.tables.contains_key(endpoint)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Copies the tables of `from` under the name `to` (same hardware, second role).
    pub fn alias_endpoint(&mut self, from: &str, to: &str) -> Result<()> {
        let t = self
            .tables
            .get(from)
            .cloned()
            .ok_or_else(|| Error::UnknownEndpoint(from.to_string()))?;
        self.tables.insert(to.to_string(), t);
        self.recompute_stats();
        Ok(())
    }

    pub fn lookup(&self, op: OpKind, shape: OpShape, endpoint: &str) -> Result<OpPerf> {
        let ops = self
            .tables
            .get(endpoint)
            .ok_or_else(|| Error::UnknownEndpoint(endpoint.to_string()))?;
        let t = ops
            .get(&op)
            .ok_or_else(|| Error::LutMiss(format!("{op} on `{endpoint}`")))?;
        let bi = bracket(&t.n, shape.n);
        let bj = bracket(&t.f, shape.f);
        let bk = bracket(&t.p, shape.p);
        if bi.0 == bi.1 && bj.0 == bj.1 && bk.0 == bk.1 {
            let at = t.idx(bi.0, bj.0, bk.0);
            return Ok(OpPerf {
                latency_s: t.latency[at],
                energy_j: t.energy[at],
            });
        }
        let interior = [bi.2, bj.2, bk.2].iter().all(|w| (0.0..=1.0).contains(w));
        Ok(OpPerf {
            latency_s: interpolate(t, &t.latency, bi, bj, bk, interior),
            energy_j: interpolate(t, &t.energy, bi, bj, bk, interior),
        })
    }
}

fn interpolate(
    t: &OpTable,
    values: &[f64],
    bi: (usize, usize, f64),
    bj: (usize, usize, f64),
    bk: (usize, usize, f64),
    interior: bool,
) -> f64 {
    let mut log_sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut has_zero = false;
    for (i, wi) in [(bi.0, 1.0 - bi.2), (bi.1, bi.2)] {
        for (j, wj) in [(bj.0, 1.0 - bj.2), (bj.1, bj.2)] {
            for (k, wk) in [(bk.0, 1.0 - bk.2), (bk.1, bk.2)] {
                let w = wi * wj * wk;
                if w == 0.0 {
                    continue;
                }
                let v = values[t.idx(i, j, k)];
                lo = lo.min(v);
                hi = hi.max(v);
                if v <= 0.0 {
                    has_zero = true;
                } else {
                    log_sum += w * v.ln();
                }
            }
        }
    }
    if has_zero {
        return 0.0;
    }
    let v = log_sum.exp();
    if interior {
        v.clamp(lo, hi)
    } else {
        v
    }
}

/// Populates the table from the analytic endpoint models.
pub fn build_lut(profiles: &[&EndpointProfile], grid: &BucketGrid) -> Result<PerfLut> {
    grid.validate()?;
    if profiles.is_empty() {
        return Err(Error::config("no endpoint profiles"));
    }
    let mut entries = Vec::new();
    for profile in profiles {
        for (op, shape) in grid.points() {
            let latency_s = profile.op_latency(op, shape).expect("compute op");
            let power = profile.run_power(op, shape.f).expect("compute op");
            entries.push(LutEntry {
                endpoint: profile.name.clone(),
                op,
                n: shape.n,
                f: shape.f,
                p: shape.p,
                latency_s,
                energy_j: power * latency_s,
            });
        }
    }
    PerfLut::from_entries("analytic".to_string(), entries)
}
