use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Architecture, Layer};

/// Structural rules a candidate must satisfy to be executable end to end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    /// V1: two `Communicate` layers in a row.
    ConsecutiveCommunicate,
    /// V2: `Communicate` as the first or the last layer.
    CommunicateAtBoundary,
    /// V3: `Aggregate` with no `Sample` before it.
    AggregateWithoutGraph,
    /// V4: `Sample` or `Aggregate` after a `GlobalPooling`.
    GraphOpAfterPooling,
    /// V5: no `Combine` anywhere.
    NoCombine,
    /// V6: `Connect` whose skip source is missing, pooled away, or on the other endpoint.
    ConnectWithoutSkip,
}

impl Rule {
    pub fn code(self) -> &'static str {
        match self {
            Rule::ConsecutiveCommunicate => "V1",
            Rule::CommunicateAtBoundary => "V2",
            Rule::AggregateWithoutGraph => "V3",
            Rule::GraphOpAfterPooling => "V4",
            Rule::NoCombine => "V5",
            Rule::ConnectWithoutSkip => "V6",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Offending layer; `None` for whole-architecture rules (V5).
    pub layer: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

/// Checks every rule and reports each violation with its layer index.
pub fn check_validity(arch: &Architecture) -> ValidityReport {
    let layers = &arch.layers;
    let n = layers.len();
    let mut violations = Vec::new();
    let mut push = |rule, layer| violations.push(Violation { rule, layer });

    let mut seen_sample = false;
    let mut seen_pooling = false;
    // Index of the most recent Combine whose input is still reachable by a Connect.
    let mut skip_source: Option<usize> = None;

    for (i, layer) in layers.iter().enumerate() {
        match layer {
            Layer::Communicate => {
                if i > 0 && layers[i - 1].is_communicate() {
                    push(Rule::ConsecutiveCommunicate, Some(i));
                }
                if i == 0 || i + 1 == n {
                    push(Rule::CommunicateAtBoundary, Some(i));
                }
                skip_source = None;
            }
            Layer::Sample { .. } => {
                if seen_pooling {
                    push(Rule::GraphOpAfterPooling, Some(i));
                }
                seen_sample = true;
            }
            Layer::Aggregate { .. } => {
                if !seen_sample {
                    push(Rule::AggregateWithoutGraph, Some(i));
                }
                if seen_pooling {
                    push(Rule::GraphOpAfterPooling, Some(i));
                }
            }
            Layer::Combine { .. } => skip_source = Some(i),
            Layer::GlobalPooling => {
                seen_pooling = true;
                skip_source = None;
            }
            Layer::Connect => {
                if skip_source.is_none() {
                    push(Rule::ConnectWithoutSkip, Some(i));
                }
            }
        }
    }
    if !layers.iter().any(|l| matches!(l, Layer::Combine { .. })) {
        push(Rule::NoCombine, None);
    }
    ValidityReport { violations }
}
