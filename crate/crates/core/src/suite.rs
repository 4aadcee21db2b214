//! Multi-scenario, multi-seed benchmark suite with threshold checks.
//!
//! Each (scenario, seed) cell is an independent run of the base
//! configuration. Cells run on worker threads; results are ordered by cell,
//! so the report does not depend on scheduling. Aggregates are mean and
//! sample standard deviation over the seeds of a scenario.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::ScenarioName;
use crate::error::{Error, Result};
use crate::metrics::{csv_err, MetricsReport};
use crate::run::{execute, RunConfig};

const DEFAULT_THRESHOLDS: &str = include_str!("../assets/thresholds.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionThresholds {
    pub scenarios: Vec<ScenarioName>,
    pub accuracy_min: f64,
    pub precision_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingThresholds {
    pub db_min_ms: u64,
    pub db_max_ms: u64,
    pub tc_stability_max_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub detection: DetectionThresholds,
    pub timing: TimingThresholds,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::from_toml_str(DEFAULT_THRESHOLDS).expect("bundled thresholds parse")
    }
}

impl Thresholds {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { location: "thresholds".into(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::file(path))?;
        toml::from_str(&text).map_err(|e| Error::Parse { location: path.display().to_string(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub scenarios: Vec<ScenarioName>,
    pub n_tx: usize,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses the available parallelism.
    pub jobs: usize,
    pub base: RunConfig,
    pub thresholds: Thresholds,
    /// Per-cell artifacts go to `<out>/<scenario>_seed<seed>`.
    pub out: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            scenarios: vec![ScenarioName::S1, ScenarioName::S2, ScenarioName::S3],
            n_tx: 10_000,
            seeds: vec![1, 2, 3],
            jobs: 0,
            base: RunConfig::default(),
            thresholds: Thresholds::default(),
            out: None,
        }
    }
}

impl SuiteConfig {
    pub const MIN_SEEDS: usize = 3;

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::config("suite needs at least one scenario"));
        }
        if self.seeds.len() < Self::MIN_SEEDS {
            return Err(Error::config(format!("suite needs at least {} seeds per scenario", Self::MIN_SEEDS)));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::config("suite seeds must be distinct"));
        }
        if self.n_tx == 0 {
            return Err(Error::config("suite n_tx must be at least 1"));
        }
        self.base.validate()
    }

    fn cell_config(&self, scenario: ScenarioName, seed: u64) -> RunConfig {
        let mut cfg = self.base.clone();
        cfg.seed = seed;
        cfg.input = None;
        cfg.scenario.name = scenario;
        cfg.scenario.n_tx = Some(self.n_tx);
        cfg.output.dir = self.out.as_ref().map(|o| o.join(format!("{scenario}_seed{seed}")));
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
    pub wall_ms: f64,
}

/// Mean and sample standard deviation of the defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub n: usize,
    pub mean: Option<f64>,
    pub stdev: Option<f64>,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return MeanStd { n, mean: None, stdev: None };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let stdev = (n > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        MeanStd { n, mean: Some(mean), stdev }
    }

    fn show(&self, decimals: usize) -> String {
        match (self.mean, self.stdev) {
            (Some(m), Some(s)) => format!("{m:.decimals$} ± {s:.decimals$}"),
            (Some(m), None) => format!("{m:.decimals$}"),
            _ => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: ScenarioName,
    pub runs: usize,
    pub failed_runs: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub tc_mean_ms: MeanStd,
    pub db_mean_ms: MeanStd,
    pub l_total_mean_ms: MeanStd,
}

impl Aggregate {
    pub fn of(scenario: ScenarioName, cells: &[Cell]) -> Self {
        let mine: Vec<&Cell> = cells.iter().filter(|c| c.scenario == scenario).collect();
        let reports: Vec<&MetricsReport> = mine.iter().filter_map(|c| c.report.as_ref()).collect();
        let stat = |f: &dyn Fn(&MetricsReport) -> Option<f64>| MeanStd::of(reports.iter().map(|r| f(r)));
        Aggregate {
            scenario,
            runs: mine.len(),
            failed_runs: mine.len() - reports.len(),
            accuracy: stat(&|r| r.accuracy),
            precision: stat(&|r| r.precision),
            recall: stat(&|r| r.recall),
            tc_mean_ms: stat(&|r| r.timing.tc.map(|s| s.mean)),
            db_mean_ms: stat(&|r| r.timing.db.map(|s| s.mean)),
            l_total_mean_ms: stat(&|r| r.timing.latency.l_total_mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub n_tx: usize,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_ms: f64,
}

/// Runs every cell; a failing cell fails the suite but not the report.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let grid: Vec<(ScenarioName, u64)> =
        cfg.scenarios.iter().flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
    let jobs = match cfg.jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        j => j,
    }
    .min(grid.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Cell>>> = Mutex::new(vec![None; grid.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(scenario, seed)) = grid.get(i) else { break };
                let t = Instant::now();
                let result = execute(&cfg.cell_config(scenario, seed));
                let wall_ms = t.elapsed().as_secs_f64() * 1e3;
                let (report, error) = match result {
                    Ok(o) => (Some(o.report), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                slots.lock().expect("no worker panics while holding the lock")[i] =
                    Some(Cell { scenario, seed, report, error, wall_ms });
            });
        }
    });
    let cells: Vec<Cell> = slots.into_inner().expect("workers joined").into_iter().map(|c| c.expect("every cell ran")).collect();
    let aggregates = cfg.scenarios.iter().map(|&s| Aggregate::of(s, &cells)).collect::<Vec<_>>();
    let checks = evaluate(&cells, &aggregates, &cfg.thresholds);
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { n_tx: cfg.n_tx, cells, aggregates, checks, passed, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

/// Threshold checks over finished cells.
pub fn evaluate(cells: &[Cell], aggregates: &[Aggregate], th: &Thresholds) -> Vec<Check> {
    let mut checks = Vec::new();
    let failed: Vec<String> =
        cells.iter().filter(|c| c.report.is_none()).map(|c| format!("{}/{}", c.scenario, c.seed)).collect();
    checks.push(Check {
        name: "runs".into(),
        passed: failed.is_empty(),
        detail: if failed.is_empty() { format!("{} runs completed", cells.len()) } else { format!("failed: {}", failed.join(", ")) },
    });

    let d = &th.detection;
    for &scenario in &d.scenarios {
        let reports: Vec<&MetricsReport> =
            cells.iter().filter(|c| c.scenario == scenario).filter_map(|c| c.report.as_ref()).collect();
        let ran = cells.iter().any(|c| c.scenario == scenario);
        let min_of = |f: fn(&MetricsReport) -> Option<f64>| {
            reports.iter().map(|r| f(r)).try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
        };
        let (acc, prec) = (min_of(|r| r.accuracy), min_of(|r| r.precision));
        let ok = ran
            && reports.len() == cells.iter().filter(|c| c.scenario == scenario).count()
            && meets(acc, d.accuracy_min)
            && meets(prec, d.precision_min);
        let show = |v: Option<f64>| v.filter(|x| x.is_finite()).map_or("undefined".to_string(), |x| format!("{x:.4}"));
        checks.push(Check {
            name: format!("detection[{scenario}]"),
            passed: ok,
            detail: if ran {
                format!(
                    "min accuracy {} (>= {}), min precision {} (>= {})",
                    show(acc),
                    d.accuracy_min,
                    show(prec),
                    d.precision_min
                )
            } else {
                "scenario not in suite".into()
            },
        });
    }

    let t = &th.timing;
    let dbs: Vec<(u64, u64)> =
        cells.iter().filter_map(|c| c.report.as_ref()?.timing.db.map(|s| (s.min, s.max))).collect();
    let lo = dbs.iter().map(|d| d.0).min();
    let hi = dbs.iter().map(|d| d.1).max();
    checks.push(Check {
        name: "db_bounds".into(),
        passed: !dbs.is_empty() && lo >= Some(t.db_min_ms) && hi <= Some(t.db_max_ms),
        detail: match (lo, hi) {
            (Some(lo), Some(hi)) => format!("D_b range [{lo}, {hi}] ms within [{}, {}]", t.db_min_ms, t.db_max_ms),
            _ => "no committed blocks".into(),
        },
    });

    let means: Vec<f64> = aggregates.iter().filter_map(|a| a.tc_mean_ms.mean).collect();
    let (check, detail) = match tc_spread(&means) {
        Some(rel) => (rel < t.tc_stability_max_rel, format!("mean T_c spread {:.4} (< {})", rel, t.tc_stability_max_rel)),
        None => (false, "no confirmed transactions".into()),
    };
    checks.push(Check { name: "tc_stability".into(), passed: check, detail });
    checks
}

/// A floor at or below zero is vacuous and also admits undefined values.
fn meets(value: Option<f64>, min: f64) -> bool {
    min <= 0.0 || value.is_some_and(|v| v >= min)
}

/// `(max - min) / min` over per-scenario mean confirmation times.
pub fn tc_spread(means: &[f64]) -> Option<f64> {
    let min = means.iter().copied().reduce(f64::min)?;
    let max = means.iter().copied().reduce(f64::max)?;
    (min > 0.0).then(|| (max - min) / min)
}

impl SuiteReport {
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {} runs at n_tx={} ({:.1} s wall)", self.cells.len(), self.n_tx, self.wall_ms / 1e3);
        let _ = writeln!(
            s,
            "{:<8} {:>4} {:>17} {:>17} {:>17} {:>18} {:>14} {:>18}",
            "scenario", "runs", "accuracy", "precision", "recall", "T_c mean ms", "D_b mean ms", "L_total mean ms"
        );
        for a in &self.aggregates {
            let _ = writeln!(
                s,
                "{:<8} {:>4} {:>17} {:>17} {:>17} {:>18} {:>14} {:>18}",
                a.scenario.to_string(),
                a.runs - a.failed_runs,
                a.accuracy.show(4),
                a.precision.show(4),
                a.recall.show(4),
                a.tc_mean_ms.show(1),
                a.db_mean_ms.show(1),
                a.l_total_mean_ms.show(1),
            );
        }
        for c in &self.checks {
            let _ = writeln!(s, "{}  {:<16} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(s, "suite {}", if self.passed { "PASSED" } else { "FAILED" });
        s
    }

    /// One row per cell: the run's metrics columns plus status.
    pub fn write_cells_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = MetricsReport::CSV_HEADER.to_vec();
        header.extend(["status", "error", "wall_ms"]);
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut row = match &c.report {
                Some(r) => r.csv_row(),
                None => {
                    let mut row = vec![String::new(); MetricsReport::CSV_HEADER.len()];
                    row[0] = c.scenario.to_string();
                    row[1] = c.seed.to_string();
                    row
                }
            };
            row.push(if c.report.is_some() { "ok".into() } else { "failed".into() });
            row.push(c.error.clone().unwrap_or_default());
            row.push(format!("{:.1}", c.wall_ms));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per scenario with mean and stdev columns.
    pub fn write_summary_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let metrics = ["accuracy", "precision", "recall", "tc_mean_ms", "db_mean_ms", "l_total_mean_ms"];
        let mut header = vec!["scenario".to_string(), "runs".into(), "failed_runs".into()];
        for m in metrics {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_stdev"));
        }
        w.write_record(&header).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for a in &self.aggregates {
            let mut row = vec![a.scenario.to_string(), a.runs.to_string(), a.failed_runs.to_string()];
            for s in [a.accuracy, a.precision, a.recall, a.tc_mean_ms, a.db_mean_ms, a.l_total_mean_ms] {
                row.push(opt(s.mean));
                row.push(opt(s.stdev));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `suite_cells.csv`, `suite_summary.csv`, `suite_report.txt`
    /// and `suite_report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::file(dir))?;
        let create = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path).map(std::io::BufWriter::new).map_err(Error::file(path))
        };
        self.write_cells_csv(create("suite_cells.csv")?)?;
        self.write_summary_csv(create("suite_summary.csv")?)?;
        create("suite_report.txt")?.write_all(self.render_table().as_bytes())?;
        let mut w = create("suite_report.json")?;
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_thresholds() {
        let t = Thresholds::default();
        assert_eq!(t.detection.scenarios, vec![ScenarioName::S2]);
        assert_eq!((t.detection.accuracy_min, t.detection.precision_min), (0.98, 0.90));
        assert_eq!((t.timing.db_min_ms, t.timing.db_max_ms), (10, 50));
    }

    #[test]
    fn mean_std_is_sample_stdev() {
        let m = MeanStd::of([Some(1.0), Some(2.0), Some(3.0), None]);
        assert_eq!((m.n, m.mean, m.stdev), (3, Some(2.0), Some(1.0)));
        assert_eq!(MeanStd::of([Some(4.0)]).stdev, None);
        assert_eq!(MeanStd::of([None]).mean, None);
    }

    #[test]
    fn too_few_seeds_rejected() {
        let cfg = SuiteConfig { seeds: vec![1, 2], ..SuiteConfig::default() };
        assert!(matches!(run_suite(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn failing_cell_fails_suite_but_report_completes() {
        let mut cfg = SuiteConfig { scenarios: vec![ScenarioName::S1], n_tx: 300, ..SuiteConfig::default() };
        cfg.base.warm_start.epochs = 1;
        let blocker = tempfile::NamedTempFile::new().unwrap();
        cfg.out = Some(blocker.path().to_path_buf());
        let r = run_suite(&cfg).unwrap();
        assert_eq!(r.cells.len(), 3);
        assert!(r.cells.iter().all(|c| c.error.is_some()));
        assert!(!r.passed);
        assert!(r.render_table().contains("FAIL  runs"));
    }

    #[test]
    fn vacuous_detection_threshold_passes() {
        let mut cfg = SuiteConfig { scenarios: vec![ScenarioName::S3], n_tx: 1500, ..SuiteConfig::default() };
        cfg.base.warm_start.epochs = 2;
        cfg.thresholds.detection =
            DetectionThresholds { scenarios: vec![ScenarioName::S3], accuracy_min: 0.0, precision_min: 0.0 };
        let r = run_suite(&cfg).unwrap();
        let det = r.checks.iter().find(|c| c.name == "detection[S3]").unwrap();
        assert!(det.passed, "{}", det.detail);
        let mut buf = Vec::new();
        r.write_summary_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
