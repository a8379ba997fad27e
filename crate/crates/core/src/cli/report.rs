use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::manifest::WorkspaceManifest;
use super::paths;
use crate::arch_graph::{build_graph, FeatureKind};
use crate::design_space::{Architecture, Mapping, Side};
use crate::error::Result;
use crate::predictor::{Hyperparams, Metric, TrainReport};
use crate::profile::{PerfLut, SystemConfig};
use crate::runtime::RunReport;
use crate::search::{ArchitectureZoo, EvaluatorKind, ScoredCandidate, SearchConfig, SearchOutcome, TuningRecord, ZooSection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub metric: Metric,
    pub features: FeatureKind,
    pub hyperparams: Hyperparams,
    pub report: TrainReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub arch: Architecture,
    pub edge: String,
    pub report: RunReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub evaluator: EvaluatorKind,
    pub trials: usize,
    pub lambda: f64,
    pub evaluated: usize,
    pub invalid_draws: usize,
    pub duplicate_draws: usize,
    pub exhausted: bool,
    pub best_score: Option<f64>,
    /// Best score after 1, 10, 100, ... evaluated candidates and at the end.
    pub checkpoints: Vec<(usize, f64)>,
    pub tuning_attempts: usize,
    pub tuning_accepted: usize,
}

impl SearchSummary {
    pub fn new(
        evaluator: EvaluatorKind,
        cfg: &SearchConfig,
        outcome: &SearchOutcome,
        section: &ZooSection,
        tuning: &[TuningRecord],
    ) -> Self {
        let mut checkpoints = Vec::new();
        let mut next = 1;
        for r in &outcome.trace {
            if r.iteration + 1 == next || r.iteration + 1 == outcome.trace.len() {
                checkpoints.push((r.iteration + 1, r.best_score));
                while next <= r.iteration + 1 {
                    next *= 10;
                }
            }
        }
        SearchSummary {
            evaluator,
            trials: cfg.trials,
            lambda: cfg.lambda,
            evaluated: outcome.evaluated,
            invalid_draws: outcome.invalid_draws,
            duplicate_draws: outcome.duplicate_draws,
            exhausted: outcome.exhausted,
            best_score: section.best().map(|b| b.score),
            checkpoints,
            tuning_attempts: tuning.len(),
            tuning_accepted: tuning.iter().filter(|t| t.accepted).count(),
        }
    }
}

/// Everything a report shows, read from a workspace.
#[derive(Clone, Debug, Default)]
pub struct ReportData {
    pub system: Option<SystemConfig>,
    pub lut_source: Option<String>,
    pub training: Vec<TrainSummary>,
    pub search: Option<SearchSummary>,
    pub zoo: Option<ArchitectureZoo>,
    pub runs: Vec<(String, RunSummary)>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

impl ReportData {
    /// Reads every recorded artifact; absent ones leave their section empty, stale ones are errors.
    pub fn collect(ws: &Path, m: &WorkspaceManifest) -> Result<Self> {
        let mut d = ReportData::default();
        if m.contains("profile") {
            d.system = Some(read_json(&m.require(ws, "profile", paths::PROFILE, "coforge profile")?)?);
        }
        if m.contains("lut") {
            let lut: PerfLut = read_json(&m.require(ws, "lut", paths::LUT, "coforge profile")?)?;
            d.lut_source = Some(lut.source);
        }
        for metric in ["latency", "energy"] {
            let name = format!("train-report.{metric}");
            if m.contains(&name) {
                d.training.push(read_json(&m.require(ws, &name, &paths::train_report(metric), "coforge train-pred")?)?);
            }
        }
        if m.contains("search.summary") {
            d.search = Some(read_json(&m.require(ws, "search.summary", paths::SUMMARY, "coforge search")?)?);
        }
        if m.contains("zoo") {
            d.zoo = Some(ArchitectureZoo::load(&m.require(ws, "zoo", paths::ZOO, "coforge search")?)?);
        }
        let runs: Vec<String> = m.names_with_prefix("run.").map(str::to_string).collect();
        for name in runs {
            let path = m.require(ws, &name, "runs", "coforge run-device")?;
            d.runs.push((name, read_json(&path)?));
        }
        Ok(d)
    }

    /// Zoo sections shown: the workspace system's own, or all of them without a profile.
    fn sections(&self) -> Vec<(&String, &ZooSection)> {
        let Some(zoo) = &self.zoo else { return Vec::new() };
        let own = self.system.as_ref().map(SystemConfig::fingerprint);
        zoo.sections.iter().filter(|(fp, _)| own.as_ref().is_none_or(|o| o == *fp)).collect()
    }

    /// Graphviz sources of every shown zoo architecture, keyed by hash.
    pub fn graphs(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (_, s) in self.sections() {
            for c in s.entries() {
                out.insert(c.hash.clone(), build_graph(&c.arch)?.to_dot(&c.arch, None));
            }
        }
        Ok(out)
    }
}

struct Table {
    title: &'static str,
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: &'static str, headers: &[&'static str]) -> Self {
        Table {
            title,
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }
}

fn mapping_code(m: &Mapping) -> String {
    let mut s: String = m
        .sides
        .iter()
        .map(|side| match side {
            Side::Device => 'D',
            Side::Edge => 'E',
        })
        .collect();
    if m.implicit_return {
        s.push_str("+R");
    }
    s
}

fn layers_text(a: &Architecture) -> String {
    a.layers.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn features_label(k: FeatureKind) -> &'static str {
    match k {
        FeatureKind::OneHot => "one-hot",
        _ => "enhanced",
    }
}

fn zoo_row(objective: &str, rank: usize, c: &ScoredCandidate) -> Vec<String> {
    vec![
        objective.to_string(),
        (rank + 1).to_string(),
        c.hash.clone(),
        layers_text(&c.arch),
        mapping_code(&c.mapping),
        format!("{:.4}", c.accuracy),
        format!("{:.3}", c.latency_s * 1e3),
        format!("{:.3}", c.energy_j * 1e3),
        format!("{:.4}", c.score),
    ]
}

fn tables(d: &ReportData) -> Vec<Table> {
    let mut sys = Table::new(
        "System",
        &["pack", "fingerprint", "bandwidth (Mbps)", "latency limit (ms)", "energy limit (mJ)", "lambda", "lookup table"],
    );
    if let Some(s) = &d.system {
        sys.rows.push(vec![
            s.name.clone(),
            s.fingerprint(),
            format!("{:.3}", s.network.bandwidth_bps / 1e6),
            format!("{:.3}", s.constraints.latency_s * 1e3),
            format!("{:.3}", s.constraints.energy_j * 1e3),
            format!("{:.3}", s.lambda),
            d.lut_source.clone().unwrap_or_default(),
        ]);
    }

    let mut pred = Table::new(
        "Predictor accuracy",
        &["metric", "features", "hidden", "epochs", "train MAPE", "val MAPE", "within 10%", "within 20%", "ranking"],
    );
    for t in &d.training {
        let v = &t.report.val;
        pred.rows.push(vec![
            format!("{:?}", t.metric).to_lowercase(),
            features_label(t.features).to_string(),
            t.hyperparams.hidden.to_string(),
            t.hyperparams.epochs.to_string(),
            format!("{:.3}", t.report.train_mape),
            format!("{:.3}", v.mape),
            format!("{:.3}", v.within_10),
            format!("{:.3}", v.within_20),
            format!("{:.3}", v.ranking),
        ]);
    }

    let mut search = Table::new(
        "Search",
        &["evaluator", "trials", "evaluated", "invalid draws", "duplicate draws", "exhausted", "best score", "tuning accepted"],
    );
    let mut trace = Table::new("Best score by iteration", &["iteration", "best score"]);
    if let Some(s) = &d.search {
        search.rows.push(vec![
            format!("{:?}", s.evaluator).to_lowercase(),
            s.trials.to_string(),
            s.evaluated.to_string(),
            s.invalid_draws.to_string(),
            s.duplicate_draws.to_string(),
            s.exhausted.to_string(),
            s.best_score.map_or("none".into(), |b| format!("{b:.4}")),
            format!("{}/{}", s.tuning_accepted, s.tuning_attempts),
        ]);
        for (i, b) in &s.checkpoints {
            trace.rows.push(vec![i.to_string(), format!("{b:.4}")]);
        }
    }

    let mut zoo = Table::new(
        "Architecture zoo",
        &["objective", "rank", "hash", "layers", "mapping", "accuracy", "latency (ms)", "energy (mJ)", "score"],
    );
    for (_, s) in d.sections() {
        for (objective, list) in [("max score", &s.max_score), ("min latency", &s.min_latency), ("min energy", &s.min_energy)] {
            for (i, c) in list.iter().take(3).enumerate() {
                zoo.rows.push(zoo_row(objective, i, c));
            }
        }
    }

    let mut runs = Table::new(
        "Runs",
        &["run", "arch", "batches", "depth", "mean latency (ms)", "throughput (1/s)", "sent (B)", "received (B)", "compression", "error"],
    );
    for (name, r) in &d.runs {
        let rep = &r.report;
        runs.rows.push(vec![
            name.clone(),
            r.arch.hash_hex(),
            rep.batches.len().to_string(),
            rep.pipeline_depth.to_string(),
            format!("{:.3}", rep.mean_latency_s * 1e3),
            format!("{:.2}", rep.throughput_ips),
            rep.bytes_sent.to_string(),
            rep.bytes_received.to_string(),
            format!("{:.3}", rep.compression_ratio),
            rep.error.clone().unwrap_or_default(),
        ]);
    }
    vec![sys, pred, search, trace, zoo, runs]
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders the report; sections without data keep their headers.
pub fn render_report(d: &ReportData, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str("# coforge report\n");
            for t in tables(d) {
                let _ = write!(out, "\n## {}\n\n| {} |\n|", t.title, t.headers.join(" | "));
                out.push_str(&"---|".repeat(t.headers.len()));
                out.push('\n');
                for r in &t.rows {
                    let cells: Vec<String> = r.iter().map(|c| c.replace('|', "\\|")).collect();
                    let _ = writeln!(out, "| {} |", cells.join(" | "));
                }
            }
        }
        ReportFormat::Csv => {
            for (i, t) in tables(d).iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "# {}", t.title);
                let headers: Vec<String> = t.headers.iter().map(|h| csv_field(h)).collect();
                let _ = writeln!(out, "{}", headers.join(","));
                for r in &t.rows {
                    let cells: Vec<String> = r.iter().map(|c| csv_field(c)).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
            }
        }
    }
    out
}
