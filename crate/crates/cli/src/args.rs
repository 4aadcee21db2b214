use std::path::PathBuf;

use anfb_core::datagen::ScenarioName;
use anfb_core::ledger::TamperField;
use anfb_core::metrics::PositiveRule;
use anfb_core::run::OutputFormat;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "anfb", version, about = "Fraud-screening pipeline simulator with a proof-of-authority ledger")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or load) a stream, run the pipeline and write artifacts.
    Run(RunArgs),
    /// Write a labeled synthetic dataset as CSV.
    Gen(GenArgs),
    /// Check a ledger export for integrity.
    Verify(VerifyArgs),
    /// Write a copy of a ledger export with one bit flipped.
    Tamper(TamperArgs),
    /// Recompute the metrics report from a run's artifacts.
    Metrics(MetricsArgs),
    /// Run scenarios over several seeds and check acceptance thresholds.
    Suite(SuiteArgs),
}

/// Overrides shared by `run`, `gen` and `suite`. Flags beat the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Scenario preset: S1, S2 or S3.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioName>,
    /// Number of transactions.
    #[arg(long)]
    pub n_tx: Option<usize>,
    /// Share of planted fraud, overriding the preset.
    #[arg(long)]
    pub fraud_rate: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Repeat the run recorded in a manifest (requires --out).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["config", "scenario", "n_tx", "fraud_rate", "seed"])]
    pub manifest: Option<PathBuf>,
    /// Read transactions from CSV instead of generating them.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Validator count.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Approvals needed to commit a block.
    #[arg(long)]
    pub theta: Option<usize>,
    /// Weight of the classifier score in the fused score.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fused score at which Monitor starts.
    #[arg(long)]
    pub eta1: Option<f64>,
    /// Fused score at which Reject starts.
    #[arg(long)]
    pub eta2: Option<f64>,
    /// Maximum transactions per block.
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Block interval in virtual ms.
    #[arg(long)]
    pub block_interval: Option<u64>,
    /// Allow block size and interval outside the standard ranges.
    #[arg(long)]
    pub relax_bounds: bool,
    /// Share of the stream used to warm-start the engine.
    #[arg(long)]
    pub warm_start: Option<f64>,
    /// Training passes over the warm-start prefix.
    #[arg(long)]
    pub warm_start_epochs: Option<usize>,
    /// JSON rule base file.
    #[arg(long, value_name = "FILE")]
    pub rule_base: Option<PathBuf>,
    /// Score without learning from labels during the run.
    #[arg(long)]
    pub no_online_learning: bool,
    /// Decisions counted as a fraud prediction: reject or reject_or_monitor.
    #[arg(long, value_parser = parse_rule)]
    pub positive_rule: Option<PositiveRule>,
    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Metrics report format; repeat for several.
    #[arg(long, value_parser = parse_format)]
    pub format: Vec<OutputFormat>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Destination CSV; a `<stem>.manifest.json` is written next to it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Ledger export (JSON Lines).
    pub ledger: PathBuf,
    /// Also verify an incident log export.
    #[arg(long, value_name = "FILE")]
    pub incidents: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TamperArgs {
    /// Ledger export to copy; it is never modified.
    pub ledger: PathBuf,
    /// Index of the block to corrupt.
    #[arg(long)]
    pub block: u64,
    /// Field to corrupt: amount, risk, label, receiver, created_at, prev_hash, hash or signature.
    #[arg(long, value_parser = parse_field)]
    pub field: TamperField,
    /// Entry within the block, for per-entry fields.
    #[arg(long, default_value_t = 0)]
    pub entry: usize,
    /// Bit to flip.
    #[arg(long, default_value_t = 0)]
    pub bit: u32,
    /// Destination for the corrupted copy.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Artifacts directory of a finished run.
    pub dir: PathBuf,
    /// Override the positive rule recorded in the manifest.
    #[arg(long, value_parser = parse_rule)]
    pub positive_rule: Option<PositiveRule>,
    #[arg(long, value_parser = parse_format, default_value = "json")]
    pub format: OutputFormat,
    /// Write to a file instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Base run configuration (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Acceptance thresholds (TOML); the bundled file when absent.
    #[arg(long, value_name = "FILE")]
    pub thresholds: Option<PathBuf>,
    /// Comma-separated scenarios.
    #[arg(long, value_delimiter = ',', value_parser = parse_scenario)]
    pub scenarios: Vec<ScenarioName>,
    /// Comma-separated seeds, at least three.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Transactions per run.
    #[arg(long)]
    pub n_tx: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Directory for the report and per-run artifacts.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<ScenarioName, String> {
    s.parse().map_err(|e: anfb_core::Error| e.to_string())
}

fn parse_rule(s: &str) -> Result<PositiveRule, String> {
    s.parse().map_err(|e: anfb_core::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: anfb_core::Error| e.to_string())
}

fn parse_field(s: &str) -> Result<TamperField, String> {
    s.parse().map_err(|e: anfb_core::Error| e.to_string())
}
