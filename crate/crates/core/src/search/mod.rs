//! Constraint-based random search over architectures and their mappings.
//!
//! Stage 1 samples valid architectures uniformly, evaluates latency and
//! device energy with the simulator or the trained predictors, and scores
//! feasible candidates by `acc - lambda * (w_l * L / C_lat + w_e * E / C_e)`;
//! infeasible ones score exactly `-1`. Stage 2 optionally scales down
//! function settings of the best candidates while the accuracy loss stays
//! within budget. An evolutionary baseline is provided for comparison.

mod evolution;
mod oracle;
mod zoo;

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cosim::simulate;
use crate::design_space::{check_validity, derive_mapping, Architecture, Layer, Mapping, SpaceConfig};
use crate::error::{Error, Result};
use crate::predictor::{predict_corrected, Metric, Predictor};
use crate::profile::{Constraints, ObjectiveWeights, System, SystemConfig};

pub use evolution::{evolutionary_baseline, evolve_population, EvolutionConfig, EvolutionOutcome, EvolutionRecord};
pub use oracle::{AccuracyOracle, SyntheticOracle, TableOracle};
pub use zoo::{dispatch, ArchitectureZoo, ZooSection};

pub fn feasible(latency_s: f64, energy_j: f64, c: &Constraints) -> bool {
    latency_s < c.latency_s && energy_j < c.energy_j
}

/// Constraint-normalised system cost `w_l * L / C_lat + w_e * E / C_e`.
pub fn system_cost(latency_s: f64, energy_j: f64, c: &Constraints, w: &ObjectiveWeights) -> f64 {
    w.latency * latency_s / c.latency_s + w.energy * energy_j / c.energy_j
}

pub fn score(accuracy: f64, latency_s: f64, energy_j: f64, c: &Constraints, lambda: f64, w: &ObjectiveWeights) -> f64 {
    if feasible(latency_s, energy_j, c) {
        accuracy - lambda * system_cost(latency_s, energy_j, c, w)
    } else {
        -1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Simulator,
    Predictor,
}

/// Source of latency and energy estimates during search.
#[derive(Clone, Copy, Debug)]
pub enum Evaluator<'a> {
    Simulator,
    /// Corrected latency prediction and energy prediction; winners are re-simulated.
    Predictor {
        latency: &'a Predictor,
        energy: &'a Predictor,
    },
}

impl Evaluator<'_> {
    pub fn kind(&self) -> EvaluatorKind {
        match self {
            Evaluator::Simulator => EvaluatorKind::Simulator,
            Evaluator::Predictor { .. } => EvaluatorKind::Predictor,
        }
    }

    fn evaluate(&self, arch: &Architecture, sys: &System) -> Result<(f64, f64)> {
        match self {
            Evaluator::Simulator => {
                let est = simulate(arch, sys)?;
                Ok((est.latency_s, est.device_energy_j))
            }
            Evaluator::Predictor { latency, energy } => {
                if latency.metric != Metric::Latency || energy.metric != Metric::Energy {
                    return Err(Error::Precondition("predictor metrics do not match their roles".into()));
                }
                Ok((predict_corrected(latency, arch, sys)?, energy.predict(arch, sys)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Operation-search iterations (valid, distinct candidates evaluated).
    pub trials: usize,
    /// Function-tuning iterations; 0 skips stage 2.
    pub tuning_iters: usize,
    pub lambda: f64,
    pub weights: ObjectiveWeights,
    pub zoo_capacity: usize,
    pub seed: u64,
    /// Skip candidates that were already evaluated.
    pub dedup: bool,
    /// Candidates re-simulated before zoo admission when using predictors.
    pub verify_top_k: usize,
    /// Zoo members eligible for function tuning.
    pub tuning_top_k: usize,
    /// Largest accepted accuracy loss of a scaled-down variant.
    pub accuracy_budget: f64,
    pub max_invalid_draws: usize,
    /// Consecutive duplicate draws after which the space counts as exhausted.
    pub max_duplicate_draws: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            trials: 1000,
            tuning_iters: 0,
            lambda: 0.5,
            weights: ObjectiveWeights::default(),
            zoo_capacity: 10,
            seed: 0,
            dedup: true,
            verify_top_k: 10,
            tuning_top_k: 10,
            accuracy_budget: 0.005,
            max_invalid_draws: 10_000,
            max_duplicate_draws: 10_000,
        }
    }
}

impl SearchConfig {
    /// Defaults with `lambda` and weights taken from the system configuration.
    pub fn for_system(cfg: &SystemConfig) -> Self {
        SearchConfig {
            lambda: cfg.lambda,
            weights: cfg.weights.clone(),
            ..SearchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda must be >= 0"));
        }
        if self.zoo_capacity == 0 || self.max_invalid_draws == 0 || self.max_duplicate_draws == 0 {
            return Err(Error::config("zoo capacity and draw limits must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub arch: Architecture,
    pub hash: String,
    pub mapping: Mapping,
    pub accuracy: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub score: f64,
    pub feasible: bool,
}

impl ScoredCandidate {
    pub fn new(arch: Architecture, accuracy: f64, latency_s: f64, energy_j: f64, sys: &System, cfg: &SearchConfig) -> Result<Self> {
        let c = &sys.config.constraints;
        Ok(ScoredCandidate {
            hash: arch.hash_hex(),
            mapping: derive_mapping(&arch)?,
            accuracy,
            latency_s,
            energy_j,
            score: score(accuracy, latency_s, energy_j, c, cfg.lambda, &cfg.weights),
            feasible: feasible(latency_s, energy_j, c),
            arch,
        })
    }

    fn resimulated(&self, sys: &System, cfg: &SearchConfig) -> Result<Self> {
        let est = simulate(&self.arch, sys)?;
        ScoredCandidate::new(self.arch.clone(), self.accuracy, est.latency_s, est.device_energy_j, sys, cfg)
    }
}

/// One evaluated candidate of stage 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Raw draws (valid, invalid and duplicate) up to and including this candidate.
    pub draws: usize,
    pub arch_hash: String,
    pub accuracy: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub score: f64,
    pub feasible: bool,
    pub best_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub section: ZooSection,
    pub trace: Vec<TraceRecord>,
    pub evaluated: usize,
    pub invalid_draws: usize,
    pub duplicate_draws: usize,
    /// Stopped early because no unseen valid architecture turned up.
    pub exhausted: bool,
    /// Lowest latency and energy among all evaluated candidates.
    pub min_latency_seen: f64,
    pub min_energy_seen: f64,
}

impl SearchOutcome {
    pub fn infeasible(&self) -> bool {
        self.section.is_empty()
    }

    pub fn best(&self) -> Option<&ScoredCandidate> {
        self.section.best()
    }
}

fn best_first(a: &ScoredCandidate, b: &ScoredCandidate) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.hash.cmp(&b.hash))
}

/// Stage 1: uniform random search with constraint pruning.
pub fn stage1_operation_search(
    space: &SpaceConfig,
    sys: &System,
    cfg: &SearchConfig,
    evaluator: Evaluator<'_>,
    oracle: &dyn AccuracyOracle,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen: HashSet<Architecture> = HashSet::new();
    let mut section = ZooSection::new(sys, cfg.zoo_capacity);
    let mut candidates = Vec::new();
    let mut trace = Vec::with_capacity(cfg.trials);
    let (mut draws, mut invalid_draws, mut duplicate_draws) = (0usize, 0usize, 0usize);
    let mut exhausted = false;
    let mut best_score = f64::NEG_INFINITY;
    let (mut min_lat, mut min_en) = (f64::INFINITY, f64::INFINITY);

    'trials: for iteration in 0..cfg.trials {
        let (mut invalid_run, mut duplicate_run) = (0usize, 0usize);
        let arch = loop {
            let arch = space.sample_with(&mut rng);
            draws += 1;
            if !check_validity(&arch).is_valid() {
                invalid_draws += 1;
                invalid_run += 1;
                if invalid_run >= cfg.max_invalid_draws {
                    return Err(Error::SamplingExhausted(format!(
                        "no valid architecture in {invalid_run} consecutive draws"
                    )));
                }
                continue;
            }
            invalid_run = 0;
            if cfg.dedup && seen.contains(&arch) {
                duplicate_draws += 1;
                duplicate_run += 1;
                if duplicate_run >= cfg.max_duplicate_draws {
                    exhausted = true;
                    break 'trials;
                }
                continue;
            }
            break arch;
        };
        if cfg.dedup {
            seen.insert(arch.clone());
        }
        let acc = oracle.accuracy(&arch)?;
        let (lat, en) = evaluator.evaluate(&arch, sys)?;
        min_lat = min_lat.min(lat);
        min_en = min_en.min(en);
        let cand = ScoredCandidate::new(arch, acc, lat, en, sys, cfg)?;
        best_score = best_score.max(cand.score);
        trace.push(TraceRecord {
            iteration,
            draws,
            arch_hash: cand.hash.clone(),
            accuracy: acc,
            latency_s: lat,
            energy_j: en,
            score: cand.score,
            feasible: cand.feasible,
            best_score,
        });
        match evaluator {
            Evaluator::Simulator => section.offer(&cand),
            Evaluator::Predictor { .. } => candidates.push(cand),
        }
    }

    if !candidates.is_empty() {
        verify_predicted(&mut section, candidates, sys, cfg)?;
    }
    log::info!(
        "stage 1: {} evaluated, {} invalid draws, {} duplicates, best score {:.4}",
        trace.len(),
        invalid_draws,
        duplicate_draws,
        best_score
    );
    Ok(SearchOutcome {
        section,
        evaluated: trace.len(),
        trace,
        invalid_draws,
        duplicate_draws,
        exhausted,
        min_latency_seen: min_lat,
        min_energy_seen: min_en,
    })
}

/// Re-simulates the predicted top candidates and admits those feasible under simulation.
fn verify_predicted(section: &mut ZooSection, mut candidates: Vec<ScoredCandidate>, sys: &System, cfg: &SearchConfig) -> Result<()> {
    let k = cfg.verify_top_k.max(1);
    let mut picked: Vec<ScoredCandidate> = Vec::new();
    let mut take = |list: &[ScoredCandidate]| {
        for c in list.iter().filter(|c| c.feasible).take(k) {
            if !picked.iter().any(|p| p.hash == c.hash) {
                picked.push(c.clone());
            }
        }
    };
    candidates.sort_by(best_first);
    take(&candidates);
    candidates.sort_by(|a, b| a.latency_s.total_cmp(&b.latency_s).then_with(|| a.hash.cmp(&b.hash)));
    take(&candidates);
    candidates.sort_by(|a, b| a.energy_j.total_cmp(&b.energy_j).then_with(|| a.hash.cmp(&b.hash)));
    take(&candidates);
    for c in picked {
        section.offer(&c.resimulated(sys, cfg)?);
    }
    Ok(())
}

/// Outcome of one function-tuning attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub iteration: usize,
    pub member: String,
    pub variant: Option<String>,
    pub accuracy_drop: f64,
    pub accepted: bool,
    pub reason: String,
}

/// Function settings of `arch` reduced one step at a time, within the space's lower bounds.
pub fn scale_downs(arch: &Architecture, space: &SpaceConfig) -> Vec<Architecture> {
    let mut out = Vec::new();
    for (i, layer) in arch.layers.iter().enumerate() {
        let smaller = match *layer {
            Layer::Combine { out_dim } if out_dim / 2 >= space.min_out_dim.max(1) => Layer::Combine { out_dim: out_dim / 2 },
            Layer::Sample { k } if k > space.min_k.max(1) => Layer::Sample { k: k - 1 },
            _ => continue,
        };
        let mut layers = arch.layers.clone();
        layers[i] = smaller;
        if let Ok(a) = Architecture::new(layers, arch.input) {
            out.push(a);
        }
    }
    out
}

/// Stage 2: replaces zoo members by cheaper function settings while accuracy
/// stays within `accuracy_budget` of the member's stage-1 accuracy.
pub fn stage2_function_tuning(
    section: &ZooSection,
    space: &SpaceConfig,
    sys: &System,
    cfg: &SearchConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<(ZooSection, Vec<TuningRecord>)> {
    let mut out = section.clone();
    let mut log = Vec::new();
    if cfg.tuning_iters == 0 {
        return Ok((out, log));
    }
    if section.is_empty() {
        return Err(Error::Precondition("function tuning needs a non-empty zoo".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7f4a_7c15);
    let mut origin: HashMap<String, f64> = section.entries().iter().map(|c| (c.hash.clone(), c.accuracy)).collect();
    for iteration in 0..cfg.tuning_iters {
        let pool = out.max_score.len().min(cfg.tuning_top_k.max(1));
        let member = out.max_score[rng.gen_range(0..pool)].clone();
        let base = origin.get(&member.hash).copied().unwrap_or(member.accuracy);
        let options = scale_downs(&member.arch, space);
        let Some(variant) = options.choose(&mut rng) else {
            log.push(TuningRecord {
                iteration,
                member: member.hash.clone(),
                variant: None,
                accuracy_drop: 0.0,
                accepted: false,
                reason: "all settings at lower bound".into(),
            });
            continue;
        };
        let acc = oracle.accuracy(variant)?;
        let drop = base - acc;
        let mut record = TuningRecord {
            iteration,
            member: member.hash.clone(),
            variant: Some(variant.hash_hex()),
            accuracy_drop: drop,
            accepted: false,
            reason: String::new(),
        };
        if drop > cfg.accuracy_budget + 1e-12 {
            record.reason = "accuracy loss over budget".into();
        } else {
            let est = simulate(variant, sys)?;
            let cand = ScoredCandidate::new(variant.clone(), acc, est.latency_s, est.device_energy_j, sys, cfg)?;
            if cand.feasible {
                origin.insert(cand.hash.clone(), base);
                out.replace(&member.hash, &cand);
                record.accepted = true;
                record.reason = "replaced".into();
            } else {
                record.reason = "variant violates constraints".into();
            }
        }
        log.push(record);
    }
    Ok((out, log))
}

/// Writes records as newline-delimited JSON.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Highest score over an explicit candidate list (ties by hash); for exhaustive checks.
pub fn exhaustive_best(
    archs: &[Architecture],
    sys: &System,
    cfg: &SearchConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<Option<ScoredCandidate>> {
    let mut best: Option<ScoredCandidate> = None;
    for a in archs.iter().filter(|a| check_validity(a).is_valid()) {
        let est = simulate(a, sys)?;
        let c = ScoredCandidate::new(a.clone(), oracle.accuracy(a)?, est.latency_s, est.device_energy_j, sys, cfg)?;
        if best.as_ref().is_none_or(|b| best_first(&c, b).is_lt()) {
            best = Some(c);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
