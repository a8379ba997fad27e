use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{feasible, score, ScoredCandidate};
use crate::cosim::simulate;
use crate::error::{Error, Result};
use crate::profile::{Constraints, System};

/// Top candidates of one search run, all constraint-satisfying.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZooSection {
    pub pack_fingerprint: String,
    pub bandwidth_bps: f64,
    pub constraints: Option<Constraints>,
    pub capacity: usize,
    /// Ascending latency.
    pub min_latency: Vec<ScoredCandidate>,
    /// Ascending energy.
    pub min_energy: Vec<ScoredCandidate>,
    /// Descending score.
    pub max_score: Vec<ScoredCandidate>,
}

fn insert_sorted(
    list: &mut Vec<ScoredCandidate>,
    c: &ScoredCandidate,
    capacity: usize,
    key: impl Fn(&ScoredCandidate) -> f64,
) {
    if list.iter().any(|e| e.hash == c.hash) {
        return;
    }
    let k = key(c);
    let pos = list.partition_point(|e| {
        let ke = key(e);
        ke < k || (ke == k && e.hash < c.hash)
    });
    if pos < capacity {
        list.insert(pos, c.clone());
        list.truncate(capacity);
    }
}

impl ZooSection {
    pub fn new(sys: &System, capacity: usize) -> Self {
        ZooSection {
            pack_fingerprint: sys.config.pack_fingerprint(),
            bandwidth_bps: sys.config.network.bandwidth_bps,
            constraints: Some(sys.config.constraints.clone()),
            capacity,
            ..ZooSection::default()
        }
    }

    /// Offers a candidate to every list; infeasible candidates are ignored.
    pub fn offer(&mut self, c: &ScoredCandidate) {
        if !c.feasible {
            return;
        }
        let cap = self.capacity;
        insert_sorted(&mut self.min_latency, c, cap, |e| e.latency_s);
        insert_sorted(&mut self.min_energy, c, cap, |e| e.energy_j);
        insert_sorted(&mut self.max_score, c, cap, |e| -e.score);
    }

    /// Replaces `old_hash` with `c` in every list and re-sorts.
    pub(crate) fn replace(&mut self, old_hash: &str, c: &ScoredCandidate) {
        for list in [&mut self.min_latency, &mut self.min_energy, &mut self.max_score] {
            list.retain(|e| e.hash != old_hash);
        }
        self.offer(c);
    }

    pub fn is_empty(&self) -> bool {
        self.max_score.is_empty()
    }

    pub fn best(&self) -> Option<&ScoredCandidate> {
        self.max_score.first()
    }

    /// Every distinct entry, ordered by hash.
    pub fn entries(&self) -> Vec<&ScoredCandidate> {
        let mut all: BTreeMap<&str, &ScoredCandidate> = BTreeMap::new();
        for c in self.min_latency.iter().chain(&self.min_energy).chain(&self.max_score) {
            all.entry(c.hash.as_str()).or_insert(c);
        }
        all.into_values().collect()
    }
}

/// Search results keyed by system fingerprint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureZoo {
    pub sections: BTreeMap<String, ZooSection>,
}

impl ArchitectureZoo {
    /// Adds a section; entries for an existing fingerprint are merged, never dropped.
    pub fn append(&mut self, fingerprint: String, section: ZooSection) {
        match self.sections.get_mut(&fingerprint) {
            Some(existing) => {
                existing.capacity = existing.capacity.max(section.capacity);
                for c in section.entries() {
                    existing.offer(c);
                }
            }
            None => {
                self.sections.insert(fingerprint, section);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sections.values().all(ZooSection::is_empty)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Loads `path` if it exists, appends the section and writes it back.
    pub fn append_to_file(path: &Path, fingerprint: String, section: ZooSection) -> Result<Self> {
        let mut zoo = if path.exists() {
            ArchitectureZoo::load(path)?
        } else {
            ArchitectureZoo::default()
        };
        zoo.append(fingerprint, section);
        zoo.save(path)?;
        Ok(zoo)
    }
}

/// Picks the deployment for the current system.
///
/// Every entry stored for the same profile pack is re-simulated under `sys`
/// and re-scored with its stored accuracy. The best feasible score wins, ties
/// broken by ascending architecture hash; when nothing is feasible the
/// fastest entry is returned.
pub fn dispatch(zoo: &ArchitectureZoo, sys: &System) -> Result<ScoredCandidate> {
    let pack = sys.config.pack_fingerprint();
    let mut pool: BTreeMap<String, &ScoredCandidate> = BTreeMap::new();
    for section in zoo.sections.values().filter(|s| s.pack_fingerprint == pack) {
        for c in section.entries() {
            pool.entry(c.hash.clone()).or_insert(c);
        }
    }
    if pool.is_empty() {
        return Err(Error::Precondition(format!(
            "zoo has no entries for profile pack {pack}"
        )));
    }
    let cfg = &sys.config;
    let mut rescored = Vec::with_capacity(pool.len());
    for c in pool.values() {
        let est = simulate(&c.arch, sys)?;
        let s = score(c.accuracy, est.latency_s, est.device_energy_j, &cfg.constraints, cfg.lambda, &cfg.weights);
        rescored.push(ScoredCandidate {
            latency_s: est.latency_s,
            energy_j: est.device_energy_j,
            score: s,
            feasible: feasible(est.latency_s, est.device_energy_j, &cfg.constraints),
            ..(*c).clone()
        });
    }
    // pool iteration is hash-ordered, so the first maximum is the smallest hash
    let mut best: Option<&ScoredCandidate> = None;
    for c in rescored.iter().filter(|c| c.feasible) {
        if best.is_none_or(|b| c.score > b.score) {
            best = Some(c);
        }
    }
    if best.is_none() {
        for c in &rescored {
            if best.is_none_or(|b| c.latency_s < b.latency_s) {
                best = Some(c);
            }
        }
    }
    Ok(best.expect("non-empty pool").clone())
}
