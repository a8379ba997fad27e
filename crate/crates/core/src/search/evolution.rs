use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AccuracyOracle, ScoredCandidate, SearchConfig, ZooSection};
use crate::cosim::simulate;
use crate::design_space::{check_validity, Architecture, SpaceConfig};
use crate::error::{Error, Result};
use crate::profile::System;

/// (mu + lambda) evolution with per-layer mutation and binary tournaments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population: usize,
    pub offspring: usize,
    /// Probability that each layer is redrawn from the space.
    pub mutation_rate: f64,
    pub tournament: usize,
    /// Total evaluations including the initial population.
    pub trials: usize,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: 20,
            offspring: 20,
            mutation_rate: 0.15,
            tournament: 2,
            trials: 1000,
            seed: 0,
        }
    }
}

/// One evaluation of the evolutionary run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub trial: usize,
    pub generation: usize,
    pub arch_hash: String,
    pub valid: bool,
    pub score: f64,
    pub best_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOutcome {
    pub section: ZooSection,
    pub trace: Vec<EvolutionRecord>,
    pub population: Vec<Architecture>,
    pub offspring_total: usize,
    pub offspring_invalid: usize,
    pub best_score: f64,
}

impl EvolutionOutcome {
    pub fn invalidity_rate(&self) -> f64 {
        if self.offspring_total == 0 {
            0.0
        } else {
            self.offspring_invalid as f64 / self.offspring_total as f64
        }
    }
}

#[derive(Clone)]
struct Individual {
    arch: Architecture,
    score: f64,
}

struct Run<'a> {
    sys: &'a System,
    cfg: &'a SearchConfig,
    oracle: &'a dyn AccuracyOracle,
    section: ZooSection,
    trace: Vec<EvolutionRecord>,
    best: f64,
}

impl Run<'_> {
    fn evaluate(&mut self, arch: &Architecture, generation: usize) -> Result<(f64, bool)> {
        let valid = check_validity(arch).is_valid();
        let score = if valid {
            let est = simulate(arch, self.sys)?;
            let acc = self.oracle.accuracy(arch)?;
            let c = ScoredCandidate::new(arch.clone(), acc, est.latency_s, est.device_energy_j, self.sys, self.cfg)?;
            self.section.offer(&c);
            c.score
        } else {
            -1.0
        };
        self.best = self.best.max(score);
        self.trace.push(EvolutionRecord {
            trial: self.trace.len(),
            generation,
            arch_hash: arch.hash_hex(),
            valid,
            score,
            best_score: self.best,
        });
        Ok((score, valid))
    }
}

/// Runs the baseline from a random, unchecked initial population.
pub fn evolutionary_baseline(
    space: &SpaceConfig,
    sys: &System,
    evo: &EvolutionConfig,
    cfg: &SearchConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<EvolutionOutcome> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(evo.seed);
    let init = (0..evo.population).map(|_| space.sample_with(&mut rng)).collect();
    evolve(init, space, sys, evo, cfg, oracle, rng)
}

/// Runs the baseline from the given initial population.
pub fn evolve_population(
    init: Vec<Architecture>,
    space: &SpaceConfig,
    sys: &System,
    evo: &EvolutionConfig,
    cfg: &SearchConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<EvolutionOutcome> {
    space.validate()?;
    let rng = ChaCha8Rng::seed_from_u64(evo.seed);
    evolve(init, space, sys, evo, cfg, oracle, rng)
}

fn evolve(
    init: Vec<Architecture>,
    space: &SpaceConfig,
    sys: &System,
    evo: &EvolutionConfig,
    cfg: &SearchConfig,
    oracle: &dyn AccuracyOracle,
    mut rng: ChaCha8Rng,
) -> Result<EvolutionOutcome> {
    if init.is_empty() || evo.offspring == 0 || evo.tournament == 0 {
        return Err(Error::config("population, offspring and tournament size must be >= 1"));
    }
    if !(0.0..=1.0).contains(&evo.mutation_rate) {
        return Err(Error::config("mutation rate must lie in [0, 1]"));
    }
    let mu = init.len();
    let mut run = Run {
        sys,
        cfg,
        oracle,
        section: ZooSection::new(sys, cfg.zoo_capacity),
        trace: Vec::new(),
        best: f64::NEG_INFINITY,
    };
    let mut population = Vec::with_capacity(mu);
    for arch in init {
        if run.trace.len() >= evo.trials {
            break;
        }
        let (score, _) = run.evaluate(&arch, 0)?;
        population.push(Individual { arch, score });
    }
    let (mut offspring_total, mut offspring_invalid) = (0, 0);
    let mut generation = 0;
    while run.trace.len() < evo.trials && !population.is_empty() {
        generation += 1;
        let mut children = Vec::with_capacity(evo.offspring);
        while children.len() < evo.offspring && run.trace.len() < evo.trials {
            let parent = tournament(&population, evo.tournament, &mut rng);
            let mut layers = parent.arch.layers.clone();
            for layer in layers.iter_mut() {
                if rng.gen_bool(evo.mutation_rate) {
                    *layer = space.random_layer(&mut rng);
                }
            }
            let arch = Architecture::new(layers, parent.arch.input)?;
            let (score, valid) = run.evaluate(&arch, generation)?;
            offspring_total += 1;
            if !valid {
                offspring_invalid += 1;
            }
            children.push(Individual { arch, score });
        }
        population = select(population, children, mu);
    }
    log::info!(
        "evolution: {} trials, offspring invalidity {}/{}",
        run.trace.len(),
        offspring_invalid,
        offspring_total
    );
    Ok(EvolutionOutcome {
        section: run.section,
        best_score: run.best,
        trace: run.trace,
        population: population.into_iter().map(|i| i.arch).collect(),
        offspring_total,
        offspring_invalid,
    })
}

fn tournament<'p>(pop: &'p [Individual], size: usize, rng: &mut ChaCha8Rng) -> &'p Individual {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.gen_range(0..pop.len())];
        if c.score > best.score {
            best = c;
        }
    }
    best
}

/// Keeps the `mu` best distinct architectures, parents first on equal score.
fn select(parents: Vec<Individual>, children: Vec<Individual>, mu: usize) -> Vec<Individual> {
    let mut pool: Vec<Individual> = parents.into_iter().chain(children).collect();
    pool.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut seen = HashSet::new();
    let (mut kept, mut rest): (Vec<_>, Vec<_>) = (Vec::with_capacity(mu), Vec::new());
    for ind in pool {
        if kept.len() < mu && seen.insert(ind.arch.clone()) {
            kept.push(ind);
        } else {
            rest.push(ind);
        }
    }
    kept.extend(rest.into_iter().take(mu - kept.len()));
    kept
}
