//! Run configuration, end-to-end execution and artifact persistence.
//!
//! A [`RunConfig`] starts from built-in defaults, is optionally overlaid by a
//! TOML file, and is then adjusted by the caller (the CLI applies its flags
//! last). [`execute`] generates or loads the stream, warm-starts the engine
//! on a labeled prefix, drives the pipeline, computes metrics and writes the
//! artifacts listed in [`files`] together with a manifest that is enough to
//! repeat the run ([`reproduce`]).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::consensus::{Network, NetworkConfig};
use crate::datagen::{
    self, generate_with, load_csv, GeneratorParams, LabeledStream, PatternMix, ScenarioName, ScenarioSpec, SchemaMap,
    GENERATOR_VERSION,
};
use crate::error::{Error, Result};
use crate::ledger::{sha256, write_jsonl};
use crate::metrics::{MetricsReport, PositiveRule};
use crate::pipeline::{process_stream, warm_start, PipelineConfig, RunArtifacts, TxLifecycle};
use crate::risk::{EngineConfig, LogisticClassifier, RiskEngine, RuleBase};
use crate::rng;
use crate::tx::{ProfileConfig, FEATURE_LAYOUT};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const TOOL_VERSION: &str = concat!("anfb-core/", env!("CARGO_PKG_VERSION"));

/// Artifact file names inside a run's output directory.
pub mod files {
    pub const MANIFEST: &str = "manifest.json";
    pub const LEDGER: &str = "ledger.jsonl";
    pub const INCIDENTS: &str = "incidents.jsonl";
    pub const LIFECYCLES: &str = "lifecycles.csv";
    pub const EVENTS: &str = "events.jsonl";
    pub const VOTES: &str = "votes.jsonl";
    pub const FAILURES: &str = "failures.jsonl";
    pub const REVIEW: &str = "review.jsonl";
    pub const ENGINE_STATE: &str = "engine_state.json";
    pub const METRICS_JSON: &str = "metrics.json";
    pub const METRICS_CSV: &str = "metrics.csv";
    pub const SERIES_TC: &str = "series_tc.csv";
    pub const SERIES_DB: &str = "series_db.csv";
    pub const TIMING: &str = "timing.json";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    /// Defaults to the preset size.
    pub n_tx: Option<usize>,
    /// Overrides the preset fraud rate.
    pub fraud_rate: Option<f64>,
    pub n_users: Option<usize>,
    pub arrival_ms: Option<f64>,
    pub pattern_mix: Option<PatternMix>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { name: ScenarioName::S2, n_tx: None, fraud_rate: None, n_users: None, arrival_ms: None, pattern_mix: None }
    }
}

/// Reads the stream from a CSV file instead of generating it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub csv: PathBuf,
    #[serde(default)]
    pub schema: SchemaMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmStartConfig {
    /// Leading share of the stream used for offline training.
    pub fraction: f64,
    pub epochs: usize,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        WarmStartConfig { fraction: 0.2, epochs: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::config(format!("unknown output format `{s}` (json | csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Formats of the metrics report.
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: vec![OutputFormat::Json, OutputFormat::Csv] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub positive_rule: PositiveRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub input: Option<InputConfig>,
    pub generator: GeneratorParams,
    pub profile: ProfileConfig,
    pub engine: EngineConfig,
    /// JSON rule base; the built-in base when absent.
    pub rule_base: Option<PathBuf>,
    pub warm_start: WarmStartConfig,
    pub pipeline: PipelineConfig,
    pub network: NetworkConfig,
    pub metrics: MetricsConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            scenario: ScenarioConfig::default(),
            input: None,
            generator: GeneratorParams::default(),
            profile: ProfileConfig::default(),
            engine: EngineConfig::default(),
            rule_base: None,
            warm_start: WarmStartConfig::default(),
            pipeline: PipelineConfig::default(),
            network: NetworkConfig::default(),
            metrics: MetricsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { location: "config".into(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::file(path))?;
        toml::from_str(&text).map_err(|e| Error::Parse { location: path.display().to_string(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot render config: {e}")))
    }

    /// Scenario preset with every configured override applied.
    pub fn scenario_spec(&self) -> ScenarioSpec {
        let s = &self.scenario;
        let mut spec = ScenarioSpec::preset(s.name, self.seed);
        if let Some(n) = s.n_tx {
            spec.n_tx = n;
        }
        if let Some(r) = s.fraud_rate {
            spec.fraud_rate = r;
        }
        if let Some(n) = s.n_users {
            spec.n_users = n;
        }
        if let Some(a) = s.arrival_ms {
            spec.arrival_ms = a;
        }
        if let Some(m) = s.pattern_mix {
            spec.pattern_mix = m;
        }
        spec
    }

    /// Checks the whole configuration before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.input.is_none() {
            self.scenario_spec().validate()?;
            self.generator.validate()?;
        }
        self.engine.validate()?;
        self.pipeline.validate()?;
        self.network.validate()?;
        let w = self.warm_start.fraction;
        if !(w.is_finite() && (0.0..1.0).contains(&w)) {
            return Err(Error::config(format!("warm-start fraction {w} outside [0, 1)")));
        }
        if self.output.formats.is_empty() {
            return Err(Error::config("at least one output format is required"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed must fit in a signed 64-bit integer"));
        }
        Ok(())
    }

    pub fn load_rule_base(&self) -> Result<RuleBase> {
        match &self.rule_base {
            None => Ok(RuleBase::default_rules()),
            Some(path) => {
                let file = File::open(path).map_err(Error::file(path))?;
                serde_json::from_reader(BufReader::new(file))
                    .map_err(|e| Error::Parse { location: path.display().to_string(), message: e.to_string() })
            }
        }
    }

    fn scenario_label(&self) -> String {
        self.scenario.name.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: String,
    pub n_tx: usize,
    pub fraud_count: usize,
    /// SHA-256 of the stream's canonical CSV export, hex.
    pub sha256: String,
}

impl DatasetInfo {
    pub fn of(stream: &LabeledStream) -> Result<Self> {
        Ok(DatasetInfo {
            source: stream.manifest.source.clone(),
            n_tx: stream.len(),
            fraud_count: stream.fraud_count(),
            sha256: fingerprint(stream)?,
        })
    }
}

pub fn fingerprint(stream: &LabeledStream) -> Result<String> {
    let mut buf = Vec::new();
    datagen::write_csv(stream, &mut buf)?;
    Ok(hex::encode(sha256(&[&buf])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub datagen_stream: u64,
    pub network_stream: u64,
    pub faults_stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub generator_version: String,
    pub feature_layout: String,
    pub seeds: SeedInfo,
    /// Effective configuration, defaults included.
    pub config: RunConfig,
    /// Resolved scenario; absent when the stream came from a file.
    pub scenario: Option<ScenarioSpec>,
    pub rule_base: RuleBase,
    pub dataset: DatasetInfo,
    pub warm_start_tx: usize,
}

/// Wall-clock phase durations, informational only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WallTiming {
    pub load_ms: f64,
    pub warm_start_ms: f64,
    pub pipeline_ms: f64,
    pub metrics_ms: f64,
    pub total_ms: f64,
    pub assess_us_per_tx: f64,
}

pub struct RunOutcome {
    pub stream: LabeledStream,
    pub artifacts: RunArtifacts<LogisticClassifier>,
    pub report: MetricsReport,
    pub manifest: Manifest,
    pub wall: WallTiming,
}

impl RunOutcome {
    pub fn block_delays(&self) -> Vec<u64> {
        self.artifacts.broadcasts.iter().map(|b| b.delay).collect()
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs everything in memory; nothing is written.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let rules = cfg.load_rule_base()?;
    simulate_with_rules(cfg, rules)
}

pub fn simulate_with_rules(cfg: &RunConfig, rules: RuleBase) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let (stream, scenario) = match &cfg.input {
        Some(input) => (load_csv(&input.csv, &input.schema, &cfg.profile)?, None),
        None => {
            let spec = cfg.scenario_spec();
            (generate_with(&spec, &cfg.generator, &cfg.profile)?, Some(spec))
        }
    };
    let dataset = DatasetInfo::of(&stream)?;
    let load_ms = ms_since(start);

    let t = Instant::now();
    let mut engine = RiskEngine::new(&cfg.engine, rules.clone())?;
    let warm = (stream.len() as f64 * cfg.warm_start.fraction).floor() as usize;
    warm_start(&mut engine, &stream.transactions[..warm], cfg.warm_start.epochs)?;
    let warm_start_ms = ms_since(t);

    let t = Instant::now();
    let mut network = Network::new(&cfg.network, cfg.seed)?;
    let artifacts = process_stream(&stream.transactions, &cfg.pipeline, engine, &mut network, warm)?;
    let pipeline_ms = ms_since(t);

    let t = Instant::now();
    let delays: Vec<u64> = artifacts.broadcasts.iter().map(|b| b.delay).collect();
    let report = MetricsReport::compute(
        &cfg.scenario_label(),
        cfg.seed,
        &artifacts.lifecycles,
        &delays,
        artifacts.ledger.len() - 1,
        cfg.metrics.positive_rule,
    )?;
    let metrics_ms = ms_since(t);

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        tool_version: TOOL_VERSION.into(),
        generator_version: GENERATOR_VERSION.into(),
        feature_layout: FEATURE_LAYOUT.into(),
        seeds: SeedInfo {
            seed: cfg.seed,
            datagen_stream: rng::STREAM_DATAGEN,
            network_stream: rng::STREAM_NETWORK,
            faults_stream: rng::STREAM_FAULTS,
        },
        config: cfg.clone(),
        scenario,
        rule_base: rules,
        dataset,
        warm_start_tx: warm,
    };
    let wall = WallTiming {
        load_ms,
        warm_start_ms,
        pipeline_ms,
        metrics_ms,
        total_ms: ms_since(start),
        assess_us_per_tx: if stream.is_empty() { 0.0 } else { pipeline_ms * 1e3 / stream.len() as f64 },
    };
    Ok(RunOutcome { stream, artifacts, report, manifest, wall })
}

/// Simulates and, when an output directory is configured, writes artifacts.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let outcome = simulate(cfg)?;
    if let Some(dir) = &cfg.output.dir {
        write_artifacts(dir, &outcome, &cfg.output.formats)?;
    }
    Ok(outcome)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = File::open(path).map_err(Error::file(path))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse { location: path.display().to_string(), message: e.to_string() })
}

/// Repeats the run recorded in a manifest, writing into `out`.
///
/// The rule base comes from the manifest itself. A stream loaded from a
/// file must still hash to the recorded fingerprint.
pub fn reproduce(manifest_path: &Path, out: &Path) -> Result<RunOutcome> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.schema_version != MANIFEST_SCHEMA {
        return Err(Error::Schema(format!("manifest schema {} unsupported", manifest.schema_version)));
    }
    if let Some(parent) = manifest_path.parent() {
        if same_dir(parent, out) {
            return Err(Error::config("reproduction output must differ from the manifest's directory"));
        }
    }
    let mut cfg = manifest.config.clone();
    cfg.output.dir = Some(out.to_path_buf());
    let outcome = simulate_with_rules(&cfg, manifest.rule_base.clone())?;
    if outcome.manifest.dataset.sha256 != manifest.dataset.sha256 {
        return Err(Error::config(format!(
            "dataset fingerprint {} does not match the manifest's {}",
            outcome.manifest.dataset.sha256, manifest.dataset.sha256
        )));
    }
    write_artifacts(out, &outcome, &cfg.output.formats)?;
    Ok(outcome)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    let a = if a.as_os_str().is_empty() { Path::new(".") } else { a };
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

struct Out<'a> {
    dir: &'a Path,
}

impl Out<'_> {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(Error::file(path))?))
    }

    fn finish(&self, name: &str, mut w: BufWriter<File>) -> Result<()> {
        w.flush().map_err(Error::file(self.dir.join(name)))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        self.finish(name, w)
    }

    fn jsonl<'v, T: Serialize + 'v>(&self, name: &str, items: impl IntoIterator<Item = &'v T>) -> Result<()> {
        let mut w = self.create(name)?;
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            w.write_all(b"\n")?;
        }
        self.finish(name, w)
    }

    fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_write_err(&path, e))?;
        w.write_record(header).map_err(|e| csv_write_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| csv_write_err(&path, e))?;
        }
        w.flush().map_err(Error::file(path))
    }
}

fn csv_write_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv { path: path.to_owned(), line: 0, message: e.to_string() }
}

pub fn write_artifacts(dir: &Path, outcome: &RunOutcome, formats: &[OutputFormat]) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::file(dir))?;
    let out = Out { dir };
    let a = &outcome.artifacts;

    let mut w = out.create(files::LEDGER)?;
    write_jsonl(&a.ledger, &mut w)?;
    out.finish(files::LEDGER, w)?;

    let mut w = out.create(files::INCIDENTS)?;
    a.incidents.write_jsonl(&mut w)?;
    out.finish(files::INCIDENTS, w)?;

    write_lifecycles(&dir.join(files::LIFECYCLES), &a.lifecycles)?;
    out.jsonl(files::EVENTS, &a.events)?;
    out.jsonl(files::VOTES, &a.votes)?;
    out.jsonl(files::FAILURES, &a.failures)?;
    out.jsonl(files::REVIEW, &a.review)?;
    out.json(files::ENGINE_STATE, &a.engine)?;

    if formats.contains(&OutputFormat::Json) {
        out.json(files::METRICS_JSON, &outcome.report)?;
    }
    if formats.contains(&OutputFormat::Csv) {
        let mut w = out.create(files::METRICS_CSV)?;
        outcome.report.write_csv(&mut w)?;
        out.finish(files::METRICS_CSV, w)?;
    }

    let tc_rows = a.lifecycles.iter().filter_map(|l| {
        let (t, b) = (l.t_confirmed?, l.block_index?);
        Some(vec![l.tx_id.to_string(), b.to_string(), l.t_submitted.to_string(), t.to_string(), (t - l.t_submitted).to_string()])
    });
    out.csv(files::SERIES_TC, &["tx_id", "block_index", "t_submitted", "t_confirmed", "tc_ms"], tc_rows)?;
    let db_rows = a.broadcasts.iter().map(|b| vec![b.block_index.to_string(), b.sent_at.to_string(), b.delay.to_string()]);
    out.csv(files::SERIES_DB, &["block_index", "sent_at", "db_ms"], db_rows)?;

    out.json(files::TIMING, &outcome.wall)?;
    out.json(files::MANIFEST, &outcome.manifest)
}

pub fn write_lifecycles(path: &Path, lifecycles: &[TxLifecycle]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_write_err(path, e))?;
    for lc in lifecycles {
        w.serialize(lc).map_err(|e| csv_write_err(path, e))?;
    }
    w.flush().map_err(Error::file(path))
}

pub fn read_lifecycles(path: &Path) -> Result<Vec<TxLifecycle>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_write_err(path, e))?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Csv { path: path.to_owned(), line, message: e.to_string() }
            })
        })
        .collect()
}

pub fn read_block_delays(path: &Path) -> Result<Vec<u64>> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        block_index: u64,
        db_ms: u64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_write_err(path, e))?;
    r.deserialize::<Row>()
        .map(|row| {
            row.map(|r| r.db_ms).map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Csv { path: path.to_owned(), line, message: e.to_string() }
            })
        })
        .collect()
}

/// Recomputes the metrics report from a run's exported artifacts alone.
pub fn recompute_metrics(dir: &Path, rule: Option<PositiveRule>) -> Result<MetricsReport> {
    let manifest = read_manifest(&dir.join(files::MANIFEST))?;
    let lifecycles = read_lifecycles(&dir.join(files::LIFECYCLES))?;
    let delays = read_block_delays(&dir.join(files::SERIES_DB))?;
    MetricsReport::compute(
        &manifest.config.scenario_label(),
        manifest.config.seed,
        &lifecycles,
        &delays,
        delays.len(),
        rule.unwrap_or(manifest.config.metrics.positive_rule),
    )
}
