use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{check_validity, Architecture};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Device,
    Edge,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Device => Side::Edge,
            Side::Edge => Side::Device,
        }
    }
}

/// Endpoint assignment per layer.
///
/// A `Communicate` layer is recorded with the side that sends; the layer after
/// it runs on the opposite side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub sides: Vec<Side>,
    /// The final tensor ends on the edge and has to be shipped back.
    pub implicit_return: bool,
}

impl Mapping {
    pub fn side_changes(&self) -> usize {
        self.sides.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub fn final_side(&self) -> Side {
        *self.sides.last().expect("mapping of a non-empty architecture")
    }
}

/// One step of the sequential execution of a mapped architecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecutionStage {
    /// A maximal run of compute layers on one endpoint.
    Compute { side: Side, layers: Range<usize> },
    /// The `Communicate` layer at `layer`, sent by `from`.
    Transfer { layer: usize, from: Side },
    /// Implicit edge-to-device transfer of the final tensor.
    Return,
}

pub fn derive_mapping(arch: &Architecture) -> Result<Mapping> {
    let report = check_validity(arch);
    if !report.is_valid() {
        return Err(Error::Precondition(format!(
            "derive_mapping needs a valid architecture, got violations {:?}",
            report.violations
        )));
    }
    Ok(derive_mapping_unchecked(arch))
}

pub(crate) fn derive_mapping_unchecked(arch: &Architecture) -> Mapping {
    let mut side = Side::Device;
    let mut sides = Vec::with_capacity(arch.len());
    for layer in &arch.layers {
        sides.push(side);
        if layer.is_communicate() {
            side = side.opposite();
        }
    }
    let last_compute = arch
        .layers
        .iter()
        .zip(&sides)
        .rev()
        .find(|(l, _)| !l.is_communicate())
        .map(|(_, s)| *s)
        .unwrap_or(Side::Device);
    Mapping {
        sides,
        implicit_return: last_compute == Side::Edge,
    }
}

impl Mapping {
    /// Splits the architecture into compute runs, transfers and the optional return.
    pub fn stages(&self, arch: &Architecture) -> Vec<ExecutionStage> {
        let mut stages = Vec::new();
        let mut start = 0;
        for (i, layer) in arch.layers.iter().enumerate() {
            if layer.is_communicate() {
                if start < i {
                    stages.push(ExecutionStage::Compute {
                        side: self.sides[start],
                        layers: start..i,
                    });
                }
                stages.push(ExecutionStage::Transfer {
                    layer: i,
                    from: self.sides[i],
                });
                start = i + 1;
            }
        }
        if start < arch.len() {
            stages.push(ExecutionStage::Compute {
                side: self.sides[start],
                layers: start..arch.len(),
            });
        }
        if self.implicit_return {
            stages.push(ExecutionStage::Return);
        }
        stages
    }
}
