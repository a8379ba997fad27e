//! Unified operation vocabulary.
//!
//! An [`Architecture`] is an ordered list of layers drawn from six operation
//! kinds. `Communicate` is an ordinary layer in this vocabulary: every
//! occurrence moves execution to the opposite endpoint, so the device-edge
//! mapping of a candidate is implied by where its `Communicate` layers sit.

mod mapping;
mod sampler;
mod shape;
mod validity;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use mapping::{derive_mapping, ExecutionStage, Mapping, Side};
pub use sampler::{enumerate_architectures, sample_architecture, sample_valid, SpaceConfig};
pub(crate) use shape::{comm_volume_traced, forwards_graph};
pub use shape::{comm_volume, op_shape, return_volume, trace_shapes, LayerShape, OpShape, ShapeTrace};
pub use validity::{check_validity, Rule, ValidityReport, Violation};

/// Bytes of framing added to every device-edge message.
pub const MESSAGE_HEADER_BYTES: u64 = 15;

/// Bytes per edge-index scalar in a forwarded graph.
pub const INDEX_BYTES: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Sample,
    Aggregate,
    Communicate,
    Combine,
    GlobalPooling,
    Connect,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::Sample,
        OpKind::Aggregate,
        OpKind::Communicate,
        OpKind::Combine,
        OpKind::GlobalPooling,
        OpKind::Connect,
    ];

    /// Operation kinds that execute on an endpoint (everything except `Communicate`).
    pub const COMPUTE: [OpKind; 5] = [
        OpKind::Sample,
        OpKind::Aggregate,
        OpKind::Combine,
        OpKind::GlobalPooling,
        OpKind::Connect,
    ];

    /// Stable position used by one-hot encodings.
    pub fn index(self) -> usize {
        match self {
            OpKind::Sample => 0,
            OpKind::Aggregate => 1,
            OpKind::Communicate => 2,
            OpKind::Combine => 3,
            OpKind::GlobalPooling => 4,
            OpKind::Connect => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Sample => "sample",
            OpKind::Aggregate => "aggregate",
            OpKind::Communicate => "communicate",
            OpKind::Combine => "combine",
            OpKind::GlobalPooling => "global_pooling",
            OpKind::Connect => "connect",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggr {
    Max,
    Mean,
    Sum,
}

/// One layer: an operation kind together with its function setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Layer {
    /// k-nearest-neighbour graph construction over the current features.
    Sample { k: u32 },
    /// Per-node reduction over the neighbours of the active graph.
    Aggregate { aggr: Aggr },
    Communicate,
    /// Dense feature transform to `out_dim` columns.
    Combine { out_dim: u32 },
    GlobalPooling,
    /// Skip concatenation with the input of the most recent `Combine`.
    Connect,
}

impl Layer {
    pub fn kind(&self) -> OpKind {
        match self {
            Layer::Sample { .. } => OpKind::Sample,
            Layer::Aggregate { .. } => OpKind::Aggregate,
            Layer::Communicate => OpKind::Communicate,
            Layer::Combine { .. } => OpKind::Combine,
            Layer::GlobalPooling => OpKind::GlobalPooling,
            Layer::Connect => OpKind::Connect,
        }
    }

    pub fn is_communicate(&self) -> bool {
        matches!(self, Layer::Communicate)
    }

    fn check_setting(&self) -> Result<()> {
        match *self {
            Layer::Sample { k } if k == 0 => Err(Error::config("sample k must be >= 1")),
            Layer::Combine { out_dim } if out_dim == 0 => {
                Err(Error::config("combine out_dim must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Sample { k } => write!(f, "sample(k={k})"),
            Layer::Aggregate { aggr } => write!(f, "aggregate({aggr:?})"),
            Layer::Combine { out_dim } => write!(f, "combine({out_dim})"),
            other => f.write_str(other.kind().as_str()),
        }
    }
}

/// `(num_nodes, feature_dim)` of the architecture input; serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputShape(pub u32, pub u32);

impl InputShape {
    pub fn num_nodes(self) -> u32 {
        self.0
    }

    pub fn feature_dim(self) -> u32 {
        self.1
    }
}

fn default_dtype_bytes() -> u32 {
    4
}

fn is_default_dtype(v: &u32) -> bool {
    *v == 4
}

#[derive(Deserialize)]
struct RawArchitecture {
    layers: Vec<Layer>,
    input: InputShape,
    #[serde(default = "default_dtype_bytes")]
    dtype_bytes: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawArchitecture")]
pub struct Architecture {
    pub layers: Vec<Layer>,
    pub input: InputShape,
    #[serde(default = "default_dtype_bytes", skip_serializing_if = "is_default_dtype")]
    pub dtype_bytes: u32,
}

impl TryFrom<RawArchitecture> for Architecture {
    type Error = Error;

    fn try_from(raw: RawArchitecture) -> Result<Self> {
        let mut arch = Architecture::new(raw.layers, raw.input)?;
        if raw.dtype_bytes == 0 {
            return Err(Error::config("dtype_bytes must be >= 1"));
        }
        arch.dtype_bytes = raw.dtype_bytes;
        Ok(arch)
    }
}

impl Architecture {
    pub fn new(layers: Vec<Layer>, input: InputShape) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("architecture needs at least one layer"));
        }
        if input.num_nodes() < 2 || input.feature_dim() < 1 {
            return Err(Error::config(format!(
                "input shape {:?} needs >= 2 nodes and >= 1 feature",
                input
            )));
        }
        for layer in &layers {
            layer.check_setting()?;
        }
        Ok(Architecture {
            layers,
            input,
            dtype_bytes: default_dtype_bytes(),
        })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.layers.iter().filter(|l| l.kind() == kind).count()
    }

    /// Canonical compact JSON, e.g. `{"layers":[{"op":"sample","k":20}],"input":[1024,3]}`.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("architecture serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Stable 16-hex-digit identifier derived from the canonical JSON.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_json().as_bytes());
        hex::encode(&digest[..8])
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{layer}")?;
        }
        write!(f, "] @ {}x{}", self.input.0, self.input.1)
    }
}

/// The DGCNN-like twelve-layer reference used to anchor the default profiles.
pub fn dgcnn_reference() -> Architecture {
    use Layer::*;
    let layers = vec![
        Sample { k: 20 },
        Aggregate { aggr: Aggr::Max },
        Combine { out_dim: 64 },
        Sample { k: 20 },
        Aggregate { aggr: Aggr::Max },
        Combine { out_dim: 64 },
        Sample { k: 20 },
        Aggregate { aggr: Aggr::Max },
        Combine { out_dim: 128 },
        GlobalPooling,
        Combine { out_dim: 256 },
        Combine { out_dim: 40 },
    ];
    Architecture::new(layers, InputShape(1024, 3)).expect("reference architecture is well formed")
}
