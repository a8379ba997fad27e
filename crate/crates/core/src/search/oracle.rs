use std::collections::HashMap;
use std::path::Path;

use crate::design_space::{Architecture, Layer, OpKind};
use crate::error::{Error, Result};

/// Validation accuracy of a candidate, standing in for supernet evaluation.
pub trait AccuracyOracle {
    fn accuracy(&self, arch: &Architecture) -> Result<f64>;
}

/// Deterministic saturating accuracy model.
///
/// With `m` contiguous `Sample, Aggregate, Combine` motifs, `a` aggregates and
/// total Combine width `W`:
///
/// ```text
/// q   = 1.0 * m + 0.5 * a + 0.25 * log2(1 + W / 64)
/// acc = 0.5 + 0.43 * (1 - exp(-q / 2))
/// ```
///
/// Accuracy rises with every term and saturates below 0.93.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SyntheticOracle;

impl SyntheticOracle {
    pub fn motifs(arch: &Architecture) -> usize {
        arch.layers
            .windows(3)
            .filter(|w| {
                matches!(
                    (w[0], w[1], w[2]),
                    (Layer::Sample { .. }, Layer::Aggregate { .. }, Layer::Combine { .. })
                )
            })
            .count()
    }

    pub fn combine_width(arch: &Architecture) -> u64 {
        arch.layers
            .iter()
            .map(|l| match l {
                Layer::Combine { out_dim } => u64::from(*out_dim),
                _ => 0,
            })
            .sum()
    }

    pub fn quality(arch: &Architecture) -> f64 {
        let m = Self::motifs(arch) as f64;
        let a = arch.count(OpKind::Aggregate) as f64;
        let w = Self::combine_width(arch) as f64;
        m + 0.5 * a + 0.25 * (1.0 + w / 64.0).log2()
    }
}

impl AccuracyOracle for SyntheticOracle {
    fn accuracy(&self, arch: &Architecture) -> Result<f64> {
        Ok(0.5 + 0.43 * (1.0 - (-Self::quality(arch) / 2.0).exp()))
    }
}

/// Accuracies keyed by [`Architecture::hash_hex`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableOracle {
    pub table: HashMap<String, f64>,
}

impl TableOracle {
    /// Reads a JSON object `{ "<arch hash>": accuracy, ... }`.
    pub fn load(path: &Path) -> Result<Self> {
        let table: HashMap<String, f64> = serde_json::from_slice(&std::fs::read(path)?)?;
        if let Some((k, v)) = table.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("accuracy {v} for {k} outside [0, 1]")));
        }
        Ok(TableOracle { table })
    }
}

impl AccuracyOracle for TableOracle {
    fn accuracy(&self, arch: &Architecture) -> Result<f64> {
        let h = arch.hash_hex();
        self.table.get(&h).copied().ok_or(Error::OracleMiss(h))
    }
}
