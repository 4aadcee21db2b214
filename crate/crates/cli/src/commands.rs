use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anfb_core::datagen::{generate_with, self_test, write_csv_file, DeviationThresholds};
use anfb_core::ledger::{read_jsonl, tamper, write_jsonl};
use anfb_core::pipeline::IncidentLog;
use anfb_core::run::{self, DatasetInfo, InputConfig, OutputFormat, RunConfig, RunOutcome};
use anfb_core::suite::{run_suite, SuiteConfig, Thresholds};
use anfb_core::Error;
use serde_json::json;

use crate::args::{Command, GenArgs, MetricsArgs, Overrides, RunArgs, SuiteArgs, TamperArgs, VerifyArgs};

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Verification(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Schema(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

type CmdResult = Result<(), Failure>;

pub fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Tamper(a) => cmd_tamper(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Suite(a) => cmd_suite(a),
    }
}

fn base_config(o: &Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = o.scenario {
        cfg.scenario.name = s;
    }
    if let Some(n) = o.n_tx {
        cfg.scenario.n_tx = Some(n);
    }
    if let Some(r) = o.fraud_rate {
        cfg.scenario.fraud_rate = Some(r);
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_run_flags(cfg: &mut RunConfig, a: &RunArgs) {
    if let Some(path) = &a.input {
        cfg.input = Some(InputConfig { csv: path.clone(), schema: Default::default() });
    }
    if let Some(n) = a.nodes {
        cfg.network.nodes = n;
    }
    if let Some(t) = a.theta {
        cfg.network.threshold = t;
    }
    let fusion = &mut cfg.engine.fusion;
    if let Some(v) = a.lambda {
        fusion.lambda = v;
    }
    if let Some(v) = a.eta1 {
        fusion.eta1 = v;
    }
    if let Some(v) = a.eta2 {
        fusion.eta2 = v;
    }
    if let Some(v) = a.block_size {
        cfg.pipeline.block_size = v;
    }
    if let Some(v) = a.block_interval {
        cfg.pipeline.block_interval = v;
    }
    if a.relax_bounds {
        cfg.pipeline.relax_bounds = true;
    }
    if let Some(v) = a.warm_start {
        cfg.warm_start.fraction = v;
    }
    if let Some(v) = a.warm_start_epochs {
        cfg.warm_start.epochs = v;
    }
    if let Some(p) = &a.rule_base {
        cfg.rule_base = Some(p.clone());
    }
    if a.no_online_learning {
        cfg.engine.online_learning = false;
    }
    if let Some(r) = a.positive_rule {
        cfg.metrics.positive_rule = r;
    }
    if let Some(o) = &a.out {
        cfg.output.dir = Some(o.clone());
    }
    if !a.format.is_empty() {
        cfg.output.formats = a.format.clone();
    }
}

fn has_run_overrides(a: &RunArgs) -> bool {
    a.input.is_some()
        || a.nodes.is_some()
        || a.theta.is_some()
        || a.lambda.is_some()
        || a.eta1.is_some()
        || a.eta2.is_some()
        || a.block_size.is_some()
        || a.block_interval.is_some()
        || a.relax_bounds
        || a.warm_start.is_some()
        || a.warm_start_epochs.is_some()
        || a.rule_base.is_some()
        || a.no_online_learning
        || a.positive_rule.is_some()
        || !a.format.is_empty()
        || a.print_config
}

fn print_summary(o: &RunOutcome, out: Option<&Path>) {
    for line in o.report.summary_lines() {
        println!("{line}");
    }
    if let Some(dir) = out {
        println!("artifacts: {}", dir.display());
    }
}

fn cmd_run(a: RunArgs) -> CmdResult {
    if let Some(manifest) = &a.manifest {
        if has_run_overrides(&a) {
            return Err(Failure::Usage("--manifest takes no other run options besides --out".into()));
        }
        let out = a.out.as_deref().ok_or_else(|| Failure::Usage("--manifest requires --out".into()))?;
        let outcome = run::reproduce(manifest, out)?;
        print_summary(&outcome, Some(out));
        return Ok(());
    }
    let mut cfg = base_config(&a.common)?;
    apply_run_flags(&mut cfg, &a);
    cfg.validate().map_err(usage)?;
    if a.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let outcome = run::execute(&cfg)?;
    print_summary(&outcome, cfg.output.dir.as_deref());
    Ok(())
}

fn gen_manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let cfg = base_config(&a.common)?;
    let spec = cfg.scenario_spec();
    spec.validate().map_err(usage)?;
    cfg.generator.validate().map_err(usage)?;
    let stream = generate_with(&spec, &cfg.generator, &cfg.profile)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_csv_file(&stream, &a.out)?;
    let non_deviant = self_test(&stream, &cfg.engine.features, &DeviationThresholds::default())?;
    let manifest = json!({
        "stream": stream.manifest,
        "dataset": DatasetInfo::of(&stream)?,
        "profile": cfg.profile,
        "self_test": { "thresholds": DeviationThresholds::default(), "non_deviant_fraud": non_deviant },
    });
    let mpath = gen_manifest_path(&a.out);
    let mut w = BufWriter::new(File::create(&mpath).map_err(io_err(&mpath))?);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(&mpath))?;
    println!("wrote {} transactions ({} fraud) to {}", stream.len(), stream.fraud_count(), a.out.display());
    println!("manifest: {}", mpath.display());
    if !non_deviant.is_empty() {
        println!("self-test: {} fraud transactions deviate in no dimension", non_deviant.len());
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn load_ledger(path: &Path) -> Result<anfb_core::ledger::Ledger, Failure> {
    read_jsonl(open(path)?).map_err(|e| match e {
        Error::Parse { .. } | Error::Schema(_) | Error::Chain { .. } | Error::Authorization { .. } | Error::Config(_) => {
            Failure::Verification(format!("{}: unreadable ledger: {e}", path.display()))
        }
        other => Failure::Runtime(other.to_string()),
    })
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let ledger = load_ledger(&a.ledger)?;
    if let Err(fault) = ledger.verify_chain() {
        return Err(Failure::Verification(format!("{}: first invalid block {}: {}", a.ledger.display(), fault.index, fault.reason)));
    }
    println!("ok: {} blocks, {} transactions", ledger.len(), ledger.tx_count());
    if let Some(path) = &a.incidents {
        let log = IncidentLog::read_jsonl(open(path)?)
            .map_err(|e| Failure::Verification(format!("{}: unreadable incident log: {e}", path.display())))?;
        if let Err(seq) = log.verify() {
            return Err(Failure::Verification(format!("{}: first invalid incident record {seq}", path.display())));
        }
        println!("ok: {} incident records", log.len());
    }
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn cmd_tamper(a: TamperArgs) -> CmdResult {
    if same_file(&a.ledger, &a.out) {
        return Err(Failure::Usage("--out must not be the input ledger".into()));
    }
    let mut ledger = read_jsonl(open(&a.ledger)?).map_err(usage)?;
    tamper(&mut ledger, a.block, a.entry, a.field, a.bit).map_err(usage)?;
    let mut w = BufWriter::new(File::create(&a.out).map_err(io_err(&a.out))?);
    write_jsonl(&ledger, &mut w)?;
    w.flush().map_err(io_err(&a.out))?;
    println!("flipped bit {} of {} in block {} -> {}", a.bit, a.field, a.block, a.out.display());
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> CmdResult {
    let report = run::recompute_metrics(&a.dir, a.positive_rule)?;
    let mut buf = Vec::new();
    match a.format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &report).map_err(|e| Failure::Runtime(e.to_string()))?;
            buf.push(b'\n');
        }
        OutputFormat::Csv => report.write_csv(&mut buf)?,
    }
    match &a.out {
        Some(path) => std::fs::write(path, &buf).map_err(io_err(path))?,
        None => std::io::stdout().write_all(&buf).map_err(|e| Failure::Runtime(e.to_string()))?,
    }
    Ok(())
}

fn cmd_suite(a: SuiteArgs) -> CmdResult {
    let mut cfg = SuiteConfig::default();
    if let Some(path) = &a.config {
        cfg.base = RunConfig::load(path).map_err(usage)?;
        cfg.base.output.dir = None;
    }
    if let Some(path) = &a.thresholds {
        cfg.thresholds = Thresholds::load(path).map_err(usage)?;
    }
    if !a.scenarios.is_empty() {
        cfg.scenarios = a.scenarios.clone();
    }
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds.clone();
    }
    if let Some(n) = a.n_tx {
        cfg.n_tx = n;
    }
    cfg.jobs = a.jobs;
    cfg.out = a.out.clone();
    cfg.validate().map_err(usage)?;
    let report = run_suite(&cfg)?;
    print!("{}", report.render_table());
    if let Some(dir) = &a.out {
        report.write(dir)?;
        println!("report: {}", dir.display());
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(format!("suite failed: {}", failed.join(", "))))
    }
}
