//! Command-line pipeline: profile, dataset, predictors, search, deployment
//! and reporting over a workspace directory.
//!
//! Every command reads its inputs through the workspace manifest, which
//! stores a SHA-256 per artifact and the hashes of the artifacts it was built
//! from. A changed or rebuilt input makes its dependents stale, and commands
//! refuse stale inputs instead of recomputing them. All randomness derives
//! from `--seed` through labelled sub-seeds.

mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::arch_graph::FeatureKind;
use crate::cosim::{generate_dataset, read_records, write_records};
use crate::design_space::{Architecture, SpaceConfig};
use crate::error::{Error, Result};
use crate::predictor::{dataset_fingerprint, prepare_samples, train, Hyperparams, Metric, Predictor};
use crate::profile::{builtin_pack, BucketGrid, PerfLut, System, SystemConfig, BUILTIN_PACKS};
use crate::runtime::{self, Codec, EdgeConfig, ProfileConfig, RunConfig};
use crate::search::{
    dispatch, stage1_operation_search, stage2_function_tuning, write_jsonl, AccuracyOracle, ArchitectureZoo,
    Evaluator, SearchConfig, SyntheticOracle, TableOracle,
};

pub use manifest::{file_sha256, sub_seed, Artifact, WorkspaceManifest, MANIFEST_FILE};
pub use report::{render_report, ReportFormat, SearchSummary};

/// Environment variable consulted when `--profile` is not given.
pub const PROFILE_ENV: &str = "COFORGE_PROFILE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_STALE: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Stale { .. } => EXIT_STALE,
        Error::Protocol(_) => EXIT_PROTOCOL,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "coforge", version, about = "Architecture-mapping co-search and device-edge co-inference")]
pub struct Cli {
    /// Workspace directory holding artifacts and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub workspace: PathBuf,
    /// Root seed; every command derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the system profile and its lookup table into the workspace.
    Profile(ProfileArgs),
    /// Sample architectures and label them with the simulator.
    GenData(GenDataArgs),
    /// Train the latency and/or energy predictors.
    TrainPred(TrainArgs),
    /// Run the architecture-mapping search and append to the zoo.
    Search(SearchArgs),
    /// Serve co-inference sessions.
    ServeEdge(ServeArgs),
    /// Deploy an architecture against an edge and measure it.
    RunDevice(RunArgs),
    /// Summarise the workspace as Markdown or CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// JSON design-space file; the twelve-layer default otherwise.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Override the number of layers.
    #[arg(long)]
    pub layers: Option<usize>,
}

impl SpaceArgs {
    fn load(&self) -> Result<SpaceConfig> {
        let mut space = match &self.space {
            Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
            None => SpaceConfig::default(),
        };
        if let Some(n) = self.layers {
            space.min_layers = n;
            space.max_layers = n;
        }
        space.validate()?;
        Ok(space)
    }
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Built-in pack name or a `.toml`/`.json` pack file.
    #[arg(long)]
    pub profile: Option<String>,
    /// Override the link bandwidth, e.g. `10mbps`.
    #[arg(long, value_parser = parse_rate)]
    pub bandwidth: Option<f64>,
    /// Time the local kernels instead of using the analytic cost model.
    #[arg(long)]
    pub measure: bool,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 9000)]
    pub samples: usize,
    #[command(flatten)]
    pub space: SpaceArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Latency,
    Energy,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Enhanced,
    OneHot,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value_t = FeatureArg::Enhanced)]
    pub features: FeatureArg,
    #[arg(long, default_value_t = 250)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorArg {
    Simulator,
    Predictor,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value_t = EvaluatorArg::Simulator)]
    pub evaluator: EvaluatorArg,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Function-tuning iterations after the operation search.
    #[arg(long, default_value_t = 0)]
    pub tuning_iters: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub zoo_capacity: usize,
    /// Accuracy table (JSON map from architecture hash to accuracy).
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[command(flatten)]
    pub space: SpaceArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "0.0.0.0:7077")]
    pub bind: String,
    /// Pace replies, e.g. `10mbps`.
    #[arg(long, value_parser = parse_rate)]
    pub throttle: Option<f64>,
    /// Exit after this many sessions.
    #[arg(long)]
    pub max_sessions: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CodecArg {
    Deflate,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    MaxScore,
    MinLatency,
    MinEnergy,
    /// Re-score every zoo entry under the workspace system.
    Dispatch,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub edge: String,
    /// Architecture JSON or zoo file; the workspace zoo otherwise.
    #[arg(long)]
    pub arch: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Objective::MaxScore)]
    pub objective: Objective,
    #[arg(long, default_value_t = 64)]
    pub batches: u32,
    #[arg(long, default_value_t = 2)]
    pub pipeline_depth: usize,
    #[arg(long, value_parser = parse_rate)]
    pub throttle: Option<f64>,
    #[arg(long, value_enum, default_value_t = CodecArg::Deflate)]
    pub codec: CodecArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
    pub format: ReportFormat,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a Graphviz file per zoo architecture into this directory.
    #[arg(long)]
    pub dump_graph: Option<PathBuf>,
}

/// Parses `10mbps`, `40Mbps`, `500kbps`, `1gbps` or a plain bits-per-second number.
pub fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let (num, mult) = [("gbps", 1e9), ("mbps", 1e6), ("kbps", 1e3), ("bps", 1.0)]
        .iter()
        .find_map(|(suf, m)| t.strip_suffix(suf).map(|n| (n.trim().to_string(), *m)))
        .unwrap_or((t.clone(), 1.0));
    match num.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v * mult),
        _ => Err(format!("`{s}` is not a positive rate like 10mbps")),
    }
}

/// Artifact paths inside a workspace.
pub mod paths {
    pub const PROFILE: &str = "profile.json";
    pub const LUT: &str = "lut.json";
    pub const TRAIN: &str = "data/train.jsonl";
    pub const VAL: &str = "data/val.jsonl";
    pub const ZOO: &str = "zoo.json";
    pub const TRACE: &str = "search/trace.jsonl";
    pub const TUNING: &str = "search/tuning.jsonl";
    pub const SUMMARY: &str = "search/summary.json";

    pub fn model(metric: &str) -> String {
        format!("models/{metric}.json")
    }

    pub fn train_report(metric: &str) -> String {
        format!("models/{metric}.report.json")
    }
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Latency => "latency",
        Metric::Energy => "energy",
    }
}

/// Parses the process arguments and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<()> {
    let ws = &cli.workspace;
    match &cli.command {
        Command::Profile(a) => cmd_profile(ws, cli.seed, a),
        Command::GenData(a) => cmd_gen_data(ws, cli.seed, a),
        Command::TrainPred(a) => cmd_train_pred(ws, cli.seed, a),
        Command::Search(a) => cmd_search(ws, cli.seed, a),
        Command::ServeEdge(a) => cmd_serve_edge(a),
        Command::RunDevice(a) => cmd_run_device(ws, cli.seed, a),
        Command::Report(a) => cmd_report(ws, a),
    }
}

fn resolve_pack(arg: Option<&str>) -> Result<SystemConfig> {
    let env = std::env::var(PROFILE_ENV).ok();
    let name = arg.or(env.as_deref()).unwrap_or(BUILTIN_PACKS[0]);
    if BUILTIN_PACKS.contains(&name) {
        builtin_pack(name)
    } else {
        SystemConfig::load(Path::new(name))
    }
}

fn write_file(ws: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = ws.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn load_system(ws: &Path, m: &WorkspaceManifest) -> Result<System> {
    let profile = m.require(ws, "profile", paths::PROFILE, "coforge profile")?;
    let lut = m.require(ws, "lut", paths::LUT, "coforge profile")?;
    let config: SystemConfig = serde_json::from_slice(&std::fs::read(profile)?)?;
    config.validate()?;
    let lut: PerfLut = serde_json::from_slice(&std::fs::read(lut)?)?;
    System::new(config, lut)
}

pub fn cmd_profile(ws: &Path, seed: u64, a: &ProfileArgs) -> Result<()> {
    std::fs::create_dir_all(ws)?;
    let mut config = resolve_pack(a.profile.as_deref())?;
    if let Some(bps) = a.bandwidth {
        config = config.with_bandwidth(bps);
    }
    let sys = if a.measure {
        let pc = ProfileConfig { repetitions: a.repetitions, seed: sub_seed(seed, "profile"), ..ProfileConfig::default() };
        let m = runtime::profile_endpoint(&pc)?;
        if m.low_confidence() > 0 {
            log::warn!("{} buckets are below the timer's resolution and flagged low-confidence", m.low_confidence());
        }
        m.system(config)?
    } else {
        System::analytic(config, &BucketGrid::default())?
    };
    let mut m = WorkspaceManifest::load(ws)?;
    write_file(ws, paths::PROFILE, &pretty(&sys.config)?)?;
    m.record(ws, "profile", paths::PROFILE, &[])?;
    write_file(ws, paths::LUT, &serde_json::to_vec(&sys.lut)?)?;
    m.record(ws, "lut", paths::LUT, &["profile"])?;
    m.save(ws)?;
    println!("profile `{}` ({}), lookup table {} entries from {}", sys.config.name, sys.config.fingerprint(), sys.lut.len(), sys.lut.source);
    Ok(())
}

pub fn cmd_gen_data(ws: &Path, seed: u64, a: &GenDataArgs) -> Result<()> {
    let mut m = WorkspaceManifest::load(ws)?;
    let sys = load_system(ws, &m)?;
    let space = a.space.load()?;
    let data = generate_dataset(&space, &sys, a.samples, sub_seed(seed, "gen-data"))?;
    std::fs::create_dir_all(ws.join("data"))?;
    write_records(&ws.join(paths::TRAIN), &data.train)?;
    write_records(&ws.join(paths::VAL), &data.val)?;
    m.record(ws, "dataset.train", paths::TRAIN, &["profile", "lut"])?;
    m.record(ws, "dataset.val", paths::VAL, &["profile", "lut"])?;
    m.save(ws)?;
    println!("{} training and {} validation records", data.train.len(), data.val.len());
    Ok(())
}

pub fn cmd_train_pred(ws: &Path, seed: u64, a: &TrainArgs) -> Result<()> {
    let mut m = WorkspaceManifest::load(ws)?;
    let sys = load_system(ws, &m)?;
    let train_recs = read_records(&m.require(ws, "dataset.train", paths::TRAIN, "coforge gen-data")?)?;
    let val_recs = read_records(&m.require(ws, "dataset.val", paths::VAL, "coforge gen-data")?)?;
    let fp = dataset_fingerprint(&train_recs);
    let metrics: &[Metric] = match a.metric {
        MetricArg::Latency => &[Metric::Latency],
        MetricArg::Energy => &[Metric::Energy],
        MetricArg::Both => &[Metric::Latency, Metric::Energy],
    };
    std::fs::create_dir_all(ws.join("models"))?;
    for &metric in metrics {
        let name = metric_name(metric);
        let kind = match a.features {
            FeatureArg::Enhanced => metric.features(),
            FeatureArg::OneHot => FeatureKind::OneHot,
        };
        let hp = Hyperparams {
            hidden: a.hidden,
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.lr,
            seed: sub_seed(seed, &format!("train-pred/{name}")),
            ..Hyperparams::default()
        };
        let tr = prepare_samples(&train_recs, &sys, metric, kind)?;
        let va = prepare_samples(&val_recs, &sys, metric, kind)?;
        let (model, report) = train(&tr, &va, metric, kind, &hp, fp.clone())?;
        model.save(&ws.join(paths::model(name)))?;
        m.record(ws, &format!("model.{name}"), paths::model(name), &["profile", "lut", "dataset.train", "dataset.val"])?;
        let summary = report::TrainSummary { metric, features: kind, hyperparams: hp, report };
        write_file(ws, &paths::train_report(name), &pretty(&summary)?)?;
        m.record(ws, &format!("train-report.{name}"), paths::train_report(name), &[&format!("model.{name}")])?;
        let v = &summary.report.val;
        println!(
            "{name}: val MAPE {:.4}, within 10% {:.3}, within 20% {:.3}, ranking {:.3}",
            v.mape, v.within_10, v.within_20, v.ranking
        );
    }
    m.save(ws)?;
    Ok(())
}

pub fn cmd_search(ws: &Path, seed: u64, a: &SearchArgs) -> Result<()> {
    let mut m = WorkspaceManifest::load(ws)?;
    let sys = load_system(ws, &m)?;
    let space = a.space.load()?;
    let mut cfg = SearchConfig {
        trials: a.trials,
        tuning_iters: a.tuning_iters,
        zoo_capacity: a.zoo_capacity,
        seed: sub_seed(seed, "search"),
        ..SearchConfig::for_system(&sys.config)
    };
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    let table;
    let oracle: &dyn AccuracyOracle = match &a.oracle {
        Some(p) => {
            table = TableOracle::load(p)?;
            &table
        }
        None => &SyntheticOracle,
    };
    let mut inputs = vec!["profile", "lut"];
    let models;
    let evaluator = match a.evaluator {
        EvaluatorArg::Simulator => Evaluator::Simulator,
        EvaluatorArg::Predictor => {
            let lat = m.require(ws, "model.latency", &paths::model("latency"), "coforge train-pred")?;
            let en = m.require(ws, "model.energy", &paths::model("energy"), "coforge train-pred")?;
            models = (Predictor::load(&lat, None)?, Predictor::load(&en, None)?);
            inputs.extend(["model.latency", "model.energy"]);
            Evaluator::Predictor { latency: &models.0, energy: &models.1 }
        }
    };
    let outcome = stage1_operation_search(&space, &sys, &cfg, evaluator, oracle)?;
    std::fs::create_dir_all(ws.join("search"))?;
    write_jsonl(&ws.join(paths::TRACE), &outcome.trace)?;
    m.record(ws, "search.trace", paths::TRACE, &inputs)?;
    let (section, tuning) = if outcome.infeasible() {
        (outcome.section.clone(), Vec::new())
    } else {
        stage2_function_tuning(&outcome.section, &space, &sys, &cfg, oracle)?
    };
    write_jsonl(&ws.join(paths::TUNING), &tuning)?;
    m.record(ws, "search.tuning", paths::TUNING, &inputs)?;
    let kind = evaluator.kind();
    let summary = SearchSummary::new(kind, &cfg, &outcome, &section, &tuning);
    write_file(ws, paths::SUMMARY, &pretty(&summary)?)?;
    m.record(ws, "search.summary", paths::SUMMARY, &inputs)?;
    if !section.is_empty() {
        ArchitectureZoo::append_to_file(&ws.join(paths::ZOO), sys.config.fingerprint(), section.clone())?;
        m.record(ws, "zoo", paths::ZOO, &["profile"])?;
    }
    m.save(ws)?;
    match section.best() {
        Some(b) => {
            println!(
                "best score {:.4}: {} ({:.2} ms, {:.2} mJ)",
                b.score,
                b.hash,
                b.latency_s * 1e3,
                b.energy_j * 1e3
            );
            Ok(())
        }
        None => Err(Error::Infeasible(format!(
            "no architecture met {} s and {} J in {} trials (fastest seen {:.4} s, lowest energy {:.4} J)",
            sys.config.constraints.latency_s,
            sys.config.constraints.energy_j,
            outcome.evaluated,
            outcome.min_latency_seen,
            outcome.min_energy_seen
        ))),
    }
}

pub fn cmd_serve_edge(a: &ServeArgs) -> Result<()> {
    let cfg = EdgeConfig { throttle_bps: a.throttle, max_sessions: a.max_sessions, ..EdgeConfig::default() };
    runtime::serve_edge(a.bind.as_str(), &cfg)
}

fn pick(zoo: &ArchitectureZoo, objective: Objective, ws: &Path, m: &WorkspaceManifest) -> Result<Architecture> {
    if objective == Objective::Dispatch {
        return Ok(dispatch(zoo, &load_system(ws, m)?)?.arch);
    }
    let mut sections: Vec<_> = zoo.sections.values().collect();
    if let Ok(sys) = load_system(ws, m) {
        let fp = sys.config.fingerprint();
        if let Some(s) = zoo.sections.get(&fp) {
            sections = vec![s];
        }
    }
    let best = sections
        .iter()
        .filter_map(|s| match objective {
            Objective::MaxScore => s.max_score.first(),
            Objective::MinLatency => s.min_latency.first(),
            Objective::MinEnergy => s.min_energy.first(),
            Objective::Dispatch => unreachable!(),
        })
        .min_by(|a, b| match objective {
            Objective::MaxScore => b.score.total_cmp(&a.score),
            Objective::MinLatency => a.latency_s.total_cmp(&b.latency_s),
            _ => a.energy_j.total_cmp(&b.energy_j),
        })
        .ok_or_else(|| Error::Precondition("zoo is empty".into()))?;
    Ok(best.arch.clone())
}

pub fn cmd_run_device(ws: &Path, seed: u64, a: &RunArgs) -> Result<()> {
    let mut m = WorkspaceManifest::load(ws)?;
    let arch = match &a.arch {
        Some(p) => {
            let bytes = std::fs::read(p)?;
            match serde_json::from_slice::<ArchitectureZoo>(&bytes) {
                Ok(zoo) if !zoo.sections.is_empty() => pick(&zoo, a.objective, ws, &m)?,
                _ => Architecture::from_json(std::str::from_utf8(&bytes).map_err(|e| Error::Config(e.to_string()))?)?,
            }
        }
        None => {
            let zoo = ArchitectureZoo::load(&m.require(ws, "zoo", paths::ZOO, "coforge search")?)?;
            pick(&zoo, a.objective, ws, &m)?
        }
    };
    let cfg = RunConfig {
        pipeline_depth: a.pipeline_depth,
        throttle_bps: a.throttle,
        codec: match a.codec {
            CodecArg::Deflate => Codec::Deflate,
            CodecArg::Identity => Codec::Identity,
        },
        weight_seed: sub_seed(seed, "run-device/weights"),
        input_seed: sub_seed(seed, "run-device/inputs"),
        io_timeout: Duration::from_secs(60),
        ..RunConfig::default()
    };
    let report = runtime::run_device(a.edge.as_str(), &arch, a.batches, &cfg)?;
    println!(
        "{}: {} batches, mean latency {:.2} ms, {:.2} inferences/s, {} B sent, {} B received, compression {:.3}",
        arch.hash_hex(),
        report.batches.len(),
        report.mean_latency_s * 1e3,
        report.throughput_ips,
        report.bytes_sent,
        report.bytes_received,
        report.compression_ratio
    );
    if ws.join(MANIFEST_FILE).exists() {
        let n = m.names_with_prefix("run.").count();
        let rel = format!("runs/run-{n:03}.json");
        let saved = report::RunSummary { arch: arch.clone(), edge: a.edge.clone(), report: report.clone() };
        write_file(ws, &rel, &pretty(&saved)?)?;
        m.record(ws, &format!("run.{n:03}"), rel, &[])?;
        m.save(ws)?;
    }
    match report.error {
        Some(e) => Err(Error::Protocol(format!("run ended early after {} batches: {e}", report.batches.len()))),
        None => Ok(()),
    }
}

pub fn cmd_report(ws: &Path, a: &ReportArgs) -> Result<()> {
    let m = WorkspaceManifest::load(ws)?;
    let data = report::ReportData::collect(ws, &m)?;
    let text = render_report(&data, a.format);
    if let Some(dir) = &a.dump_graph {
        std::fs::create_dir_all(dir)?;
        for (hash, dot) in data.graphs()? {
            std::fs::write(dir.join(format!("{hash}.dot")), dot)?;
        }
    }
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        assert_eq!(parse_rate("10mbps").unwrap(), 10e6);
        assert_eq!(parse_rate("40Mbps").unwrap(), 40e6);
        assert_eq!(parse_rate("500 kbps").unwrap(), 5e5);
        assert_eq!(parse_rate("1200").unwrap(), 1200.0);
        assert!(parse_rate("fast").is_err());
        assert!(parse_rate("-3mbps").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 2);
        assert_eq!(exit_code(&Error::Stale { name: "a".into(), path: "b".into(), reason: "c".into() }), 3);
        assert_eq!(exit_code(&Error::Protocol("x".into())), 4);
        assert_eq!(exit_code(&Error::Shape("x".into())), 1);
    }

    #[test]
    fn profile_env_fallback() {
        assert_eq!(resolve_pack(Some("pi-cpu")).unwrap().name, builtin_pack("pi-cpu").unwrap().name);
        assert!(resolve_pack(Some("/no/such/pack.toml")).is_err());
    }
}
