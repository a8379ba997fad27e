use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::simulate;
use crate::design_space::{check_validity, Architecture, SpaceConfig};
use crate::error::{Error, Result};
use crate::profile::System;

/// Draws per window of the rejection-rate check.
pub const REJECTION_WINDOW: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub arch: Architecture,
    pub latency_s: f64,
    pub energy_j: f64,
    /// Fingerprint of the system that produced the labels.
    pub sys: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<DatasetRecord>,
    pub val: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rejection-samples `n_samples` valid architectures, labels them with
/// [`simulate`] and splits them 70/30 after a seeded shuffle.
pub fn generate_dataset(space: &SpaceConfig, sys: &System, n_samples: usize, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be >= 1".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fingerprint = sys.config.fingerprint();
    let mut records = Vec::with_capacity(n_samples);
    let (mut window_draws, mut window_valid) = (0usize, 0usize);
    while records.len() < n_samples {
        let arch = space.sample_with(&mut rng);
        window_draws += 1;
        if check_validity(&arch).is_valid() {
            window_valid += 1;
            let est = simulate(&arch, sys)?;
            records.push(DatasetRecord {
                arch,
                latency_s: est.latency_s,
                energy_j: est.device_energy_j,
                sys: fingerprint.clone(),
            });
        }
        if window_draws == REJECTION_WINDOW {
            // more than 99.9% rejected
            if window_valid * 1000 < REJECTION_WINDOW {
                return Err(Error::SamplingExhausted(format!(
                    "{window_valid} valid architectures in the last {REJECTION_WINDOW} draws \
                     ({} collected so far)",
                    records.len()
                )));
            }
            window_draws = 0;
            window_valid = 0;
        }
    }
    records.shuffle(&mut rng);
    let n_train = (n_samples * 7).div_ceil(10);
    let val = records.split_off(n_train);
    Ok(Dataset { train: records, val })
}

pub fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
