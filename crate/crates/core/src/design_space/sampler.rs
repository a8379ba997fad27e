use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_validity, Aggr, Architecture, InputShape, Layer, OpKind};
use crate::error::{Error, Result};

/// Layer-wise choices of the design space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub min_layers: usize,
    pub max_layers: usize,
    pub vocabulary: Vec<OpKind>,
    pub k_choices: Vec<u32>,
    pub aggr_choices: Vec<Aggr>,
    pub out_dim_choices: Vec<u32>,
    pub input: InputShape,
    /// Lower bounds honoured by function scale-down.
    pub min_k: u32,
    pub min_out_dim: u32,
}

impl Default for SpaceConfig {
    /// The twelve-layer point-cloud space with DGCNN-style function settings.
    fn default() -> Self {
        SpaceConfig {
            min_layers: 12,
            max_layers: 12,
            vocabulary: OpKind::ALL.to_vec(),
            k_choices: vec![10, 20],
            aggr_choices: vec![Aggr::Max, Aggr::Mean, Aggr::Sum],
            out_dim_choices: vec![64, 128, 256],
            input: InputShape(1024, 3),
            min_k: 2,
            min_out_dim: 8,
        }
    }
}

impl SpaceConfig {
    /// A fixed-depth space with one setting per parameterised kind; small enough to enumerate.
    pub fn small(layers: usize) -> Self {
        SpaceConfig {
            min_layers: layers,
            max_layers: layers,
            k_choices: vec![20],
            aggr_choices: vec![Aggr::Max],
            out_dim_choices: vec![64],
            ..SpaceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_layers == 0 {
            return Err(Error::config("max_layers must be >= 1"));
        }
        if self.min_layers == 0 || self.min_layers > self.max_layers {
            return Err(Error::config(format!(
                "layer range {}..={} is empty",
                self.min_layers, self.max_layers
            )));
        }
        if self.vocabulary.is_empty() {
            return Err(Error::config("operation vocabulary is empty"));
        }
        let needs = |kind| self.vocabulary.contains(&kind);
        if needs(OpKind::Sample) && (self.k_choices.is_empty() || self.k_choices.contains(&0)) {
            return Err(Error::config("sample in vocabulary needs positive k choices"));
        }
        if needs(OpKind::Aggregate) && self.aggr_choices.is_empty() {
            return Err(Error::config("aggregate in vocabulary needs aggregator choices"));
        }
        if needs(OpKind::Combine)
            && (self.out_dim_choices.is_empty() || self.out_dim_choices.contains(&0))
        {
            return Err(Error::config("combine in vocabulary needs positive out_dim choices"));
        }
        Architecture::new(vec![Layer::Communicate], self.input)?;
        Ok(())
    }

    fn layer_choices(&self, kind: OpKind) -> Vec<Layer> {
        match kind {
            OpKind::Sample => self.k_choices.iter().map(|&k| Layer::Sample { k }).collect(),
            OpKind::Aggregate => self
                .aggr_choices
                .iter()
                .map(|&aggr| Layer::Aggregate { aggr })
                .collect(),
            OpKind::Communicate => vec![Layer::Communicate],
            OpKind::Combine => self
                .out_dim_choices
                .iter()
                .map(|&out_dim| Layer::Combine { out_dim })
                .collect(),
            OpKind::GlobalPooling => vec![Layer::GlobalPooling],
            OpKind::Connect => vec![Layer::Connect],
        }
    }

    pub(crate) fn random_layer<R: Rng + ?Sized>(&self, rng: &mut R) -> Layer {
        let kind = *self.vocabulary.choose(rng).expect("validated vocabulary");
        *self
            .layer_choices(kind)
            .choose(rng)
            .expect("validated choices")
    }

    /// Draws a uniformly random layer sequence; validity is not enforced.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Architecture {
        let len = rng.gen_range(self.min_layers..=self.max_layers);
        let layers = (0..len).map(|_| self.random_layer(rng)).collect();
        Architecture::new(layers, self.input).expect("validated space yields well-formed layers")
    }
}

pub fn sample_architecture(rng_seed: u64, space: &SpaceConfig) -> Result<Architecture> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(space.sample_with(&mut rng))
}

/// Rejection-samples until a valid architecture appears; returns it with the draw count.
pub fn sample_valid<R: Rng + ?Sized>(
    rng: &mut R,
    space: &SpaceConfig,
    max_draws: usize,
) -> Result<(Architecture, usize)> {
    for draw in 1..=max_draws {
        let arch = space.sample_with(rng);
        if check_validity(&arch).is_valid() {
            return Ok((arch, draw));
        }
    }
    Err(Error::SamplingExhausted(format!(
        "no valid architecture in {max_draws} consecutive draws"
    )))
}

/// Every layer sequence of the space (valid or not), shortest first.
pub fn enumerate_architectures(space: &SpaceConfig) -> Result<Vec<Architecture>> {
    space.validate()?;
    let choices: Vec<Layer> = space
        .vocabulary
        .iter()
        .flat_map(|&k| space.layer_choices(k))
        .collect();
    let mut out = Vec::new();
    for len in space.min_layers..=space.max_layers {
        let total = choices.len().checked_pow(len as u32).filter(|&t| t <= 5_000_000);
        let Some(total) = total else {
            return Err(Error::config(format!(
                "space with {} choices and {len} layers is too large to enumerate",
                choices.len()
            )));
        };
        for mut code in 0..total {
            let mut layers = Vec::with_capacity(len);
            for _ in 0..len {
                layers.push(choices[code % choices.len()]);
                code /= choices.len();
            }
            out.push(Architecture::new(layers, space.input)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let space = SpaceConfig::default();
        let a = sample_architecture(7, &space).unwrap();
        let b = sample_architecture(7, &space).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
        assert_ne!(a, sample_architecture(8, &space).unwrap());
    }

    #[test]
    fn restricted_vocabulary_is_forced() {
        let space = SpaceConfig {
            vocabulary: vec![OpKind::Combine],
            ..SpaceConfig::default()
        };
        let a = sample_architecture(3, &space).unwrap();
        assert!(a.layers.iter().all(|l| l.kind() == OpKind::Combine));
    }

    #[test]
    fn config_errors() {
        let empty = SpaceConfig {
            vocabulary: vec![],
            ..SpaceConfig::default()
        };
        assert!(matches!(sample_architecture(0, &empty), Err(Error::Config(_))));
        let zero = SpaceConfig {
            min_layers: 0,
            max_layers: 0,
            ..SpaceConfig::default()
        };
        assert!(matches!(sample_architecture(0, &zero), Err(Error::Config(_))));
    }

    #[test]
    fn enumeration_counts() {
        let space = SpaceConfig::small(2);
        let all = enumerate_architectures(&space).unwrap();
        assert_eq!(all.len(), 36);
        let distinct: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 36);
    }
}
