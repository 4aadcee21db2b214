//! Detection and timing metrics over run artifacts.
//!
//! Detection counts use only non-warm-up transactions that received a
//! decision. Timing uses every confirmed transaction: `T_c = t_confirmed -
//! t_submitted`, split into `L_edge + L_AI + L_blockchain`. Median and p95
//! use the nearest-rank estimator. A metric whose denominator is zero is
//! reported as undefined, never as 0 or 1.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::TxLifecycle;
use crate::risk::Decision;

/// Which decisions count as a positive (fraud) prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveRule {
    #[default]
    Reject,
    RejectOrMonitor,
}

impl PositiveRule {
    pub fn is_positive(self, d: Decision) -> bool {
        match self {
            PositiveRule::Reject => d == Decision::Reject,
            PositiveRule::RejectOrMonitor => d != Decision::Accept,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositiveRule::Reject => "reject",
            PositiveRule::RejectOrMonitor => "reject_or_monitor",
        }
    }
}

impl fmt::Display for PositiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PositiveRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(PositiveRule::Reject),
            "reject_or_monitor" => Ok(PositiveRule::RejectOrMonitor),
            _ => Err(Error::config(format!("unknown positive rule `{s}` (reject | reject_or_monitor)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(name: &'static str, num: u64, den: u64) -> Result<f64> {
    if den == 0 {
        Err(Error::UndefinedMetric(name))
    } else {
        Ok(num as f64 / den as f64)
    }
}

impl ConfusionMatrix {
    pub fn add(&mut self, label: bool, predicted: bool) {
        match (label, predicted) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> Result<f64> {
        ratio("accuracy", self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Result<f64> {
        ratio("precision", self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Result<f64> {
        ratio("recall", self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Result<f64> {
        ratio("f1", 2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

/// Tallies evaluated lifecycles: warm-up and undecided transactions are
/// skipped; a missing label is an error.
pub fn confusion(lifecycles: &[TxLifecycle], rule: PositiveRule) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::default();
    for lc in lifecycles.iter().filter(|l| !l.warmup) {
        let Some(decision) = lc.decision else { continue };
        let label = lc.label.ok_or(Error::MissingLabel(lc.tx_id))?;
        cm.add(label, rule.is_positive(decision));
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: u64,
    pub p95: u64,
    pub min: u64,
    pub max: u64,
}

/// Value at rank `ceil(q * n)` (1-based) of the sorted sample.
pub fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

impl Summary {
    pub fn of(samples: &[u64]) -> Option<Summary> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let sum: u128 = sorted.iter().map(|&v| v as u128).sum();
        Some(Summary {
            count: sorted.len(),
            mean: sum as f64 / sorted.len() as f64,
            median: nearest_rank(&sorted, 0.5),
            p95: nearest_rank(&sorted, 0.95),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Latency decomposition over confirmed transactions, with exact integer sums.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub count: u64,
    pub l_edge_sum: u64,
    pub l_ai_sum: u64,
    pub l_blockchain_sum: u64,
    pub l_total_sum: u64,
    pub l_edge_mean: Option<f64>,
    pub l_ai_mean: Option<f64>,
    pub l_blockchain_mean: Option<f64>,
    pub l_total_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub confirmed: usize,
    pub unconfirmed: usize,
    pub tc: Option<Summary>,
    pub db: Option<Summary>,
    pub latency: LatencyBreakdown,
}

pub fn timing(lifecycles: &[TxLifecycle], block_delays: &[u64]) -> TimingReport {
    let mut tc = Vec::new();
    let mut lat = LatencyBreakdown::default();
    for lc in lifecycles {
        let Some(t_c) = lc.confirmation_time() else { continue };
        tc.push(t_c);
        lat.count += 1;
        lat.l_edge_sum += lc.l_edge;
        lat.l_ai_sum += lc.l_ai;
        lat.l_blockchain_sum += t_c.saturating_sub(lc.l_edge + lc.l_ai);
        lat.l_total_sum += t_c.max(lc.l_edge + lc.l_ai);
    }
    if lat.count > 0 {
        let n = lat.count as f64;
        lat.l_edge_mean = Some(lat.l_edge_sum as f64 / n);
        lat.l_ai_mean = Some(lat.l_ai_sum as f64 / n);
        lat.l_blockchain_mean = Some(lat.l_blockchain_sum as f64 / n);
        lat.l_total_mean = Some(lat.l_total_sum as f64 / n);
    }
    TimingReport {
        confirmed: tc.len(),
        unconfirmed: lifecycles.len() - tc.len(),
        tc: Summary::of(&tc),
        db: Summary::of(block_delays),
        latency: lat,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub accept: u64,
    pub monitor: u64,
    pub reject: u64,
    pub undecided: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub n_tx: usize,
    pub evaluated: u64,
    pub positive_rule: PositiveRule,
    pub confusion: ConfusionMatrix,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Metrics whose denominator was zero.
    pub undefined: Vec<String>,
    pub decisions: DecisionCounts,
    pub blocks: usize,
    pub incidents: usize,
    pub failed: usize,
    pub timing: TimingReport,
}

impl MetricsReport {
    pub fn compute(
        scenario: &str,
        seed: u64,
        lifecycles: &[TxLifecycle],
        block_delays: &[u64],
        blocks: usize,
        rule: PositiveRule,
    ) -> Result<Self> {
        let cm = confusion(lifecycles, rule)?;
        let mut undefined = Vec::new();
        let mut take = |r: Result<f64>| match r {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(name)) => {
                undefined.push(name.to_owned());
                None
            }
            Err(_) => unreachable!("ratios only fail on zero denominators"),
        };
        let (accuracy, precision, recall, f1) = (take(cm.accuracy()), take(cm.precision()), take(cm.recall()), take(cm.f1()));
        let mut decisions = DecisionCounts::default();
        for lc in lifecycles {
            match lc.decision {
                Some(Decision::Accept) => decisions.accept += 1,
                Some(Decision::Monitor) => decisions.monitor += 1,
                Some(Decision::Reject) => decisions.reject += 1,
                None => decisions.undecided += 1,
            }
        }
        use crate::pipeline::Outcome;
        let count = |o: Outcome| lifecycles.iter().filter(|l| l.outcome == Some(o)).count();
        Ok(MetricsReport {
            scenario: scenario.to_owned(),
            seed,
            n_tx: lifecycles.len(),
            evaluated: cm.total(),
            positive_rule: rule,
            confusion: cm,
            accuracy,
            precision,
            recall,
            f1,
            undefined,
            decisions,
            blocks,
            incidents: count(Outcome::Incident),
            failed: count(Outcome::Failed),
            timing: timing(lifecycles, block_delays),
        })
    }

    pub const CSV_HEADER: [&'static str; 28] = [
        "scenario", "seed", "n_tx", "evaluated", "positive_rule", "tp", "tn", "fp", "fn", "accuracy", "precision",
        "recall", "f1", "accept", "monitor", "reject", "blocks", "incidents", "failed", "tc_mean_ms", "tc_median_ms",
        "tc_p95_ms", "db_mean_ms", "db_max_ms", "l_edge_mean_ms", "l_ai_mean_ms", "l_blockchain_mean_ms",
        "l_total_mean_ms",
    ];

    /// One flat CSV row matching [`Self::CSV_HEADER`].
    pub fn csv_row(&self) -> Vec<String> {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let t = &self.timing;
        let c = &self.confusion;
        vec![
            self.scenario.clone(),
            self.seed.to_string(),
            self.n_tx.to_string(),
            self.evaluated.to_string(),
            self.positive_rule.to_string(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            opt(self.accuracy),
            opt(self.precision),
            opt(self.recall),
            opt(self.f1),
            self.decisions.accept.to_string(),
            self.decisions.monitor.to_string(),
            self.decisions.reject.to_string(),
            self.blocks.to_string(),
            self.incidents.to_string(),
            self.failed.to_string(),
            opt(t.tc.map(|s| s.mean)),
            t.tc.map(|s| s.median.to_string()).unwrap_or_default(),
            t.tc.map(|s| s.p95.to_string()).unwrap_or_default(),
            opt(t.db.map(|s| s.mean)),
            t.db.map(|s| s.max.to_string()).unwrap_or_default(),
            opt(t.latency.l_edge_mean),
            opt(t.latency.l_ai_mean),
            opt(t.latency.l_blockchain_mean),
            opt(t.latency.l_total_mean),
        ]
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER).map_err(csv_err)?;
        w.write_record(self.csv_row()).map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }

    /// Short human-readable summary.
    pub fn summary_lines(&self) -> Vec<String> {
        fn pct(v: Option<f64>) -> String {
            v.map_or("n/a".into(), |x| format!("{:.4}", x))
        }
        fn ms(v: Option<f64>) -> String {
            v.map_or("n/a".into(), |x| format!("{x:.1} ms"))
        }
        let t = &self.timing;
        vec![
            format!("scenario {} seed {}: {} transactions, {} evaluated", self.scenario, self.seed, self.n_tx, self.evaluated),
            format!(
                "decisions: {} accept, {} monitor, {} reject; {} blocks, {} failed",
                self.decisions.accept, self.decisions.monitor, self.decisions.reject, self.blocks, self.failed
            ),
            format!("accuracy {}  precision {}  recall {}", pct(self.accuracy), pct(self.precision), pct(self.recall)),
            format!(
                "mean T_c {}  mean D_b {}  mean L_total {}",
                ms(t.tc.map(|s| s.mean)),
                ms(t.db.map(|s| s.mean)),
                ms(t.latency.l_total_mean)
            ),
        ]
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse { location: "csv".into(), message: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(cm(50, 50, 0, 0).accuracy().unwrap(), 1.0);
        assert_eq!(cm(0, 0, 50, 50).accuracy().unwrap(), 0.0);
        assert_eq!(cm(90, 890, 10, 10).accuracy().unwrap(), 0.98);
        assert!(matches!(cm(0, 0, 0, 0).accuracy(), Err(Error::UndefinedMetric("accuracy"))));
    }

    #[test]
    fn precision_examples() {
        assert_eq!(cm(9, 0, 1, 0).precision().unwrap(), 0.9);
        assert_eq!(cm(4, 10, 0, 3).precision().unwrap(), 1.0);
        assert!(matches!(cm(0, 10, 0, 3).precision(), Err(Error::UndefinedMetric("precision"))));
    }

    #[test]
    fn nearest_rank_estimator() {
        let s: Vec<u64> = (1..=20).collect();
        assert_eq!(nearest_rank(&s, 0.95), 19);
        assert_eq!(nearest_rank(&s, 0.5), 10);
        assert_eq!(nearest_rank(&[7], 0.95), 7);
        let sum = Summary::of(&[3, 1, 2]).unwrap();
        assert_eq!((sum.min, sum.median, sum.max, sum.mean), (1, 2, 3, 2.0));
        assert!(Summary::of(&[]).is_none());
    }

    fn lc(id: u64, label: Option<bool>, decision: Decision, sub: u64, conf: Option<u64>) -> TxLifecycle {
        TxLifecycle {
            tx_id: id,
            label,
            warmup: false,
            decision: Some(decision),
            r: Some(0.5),
            r_ml: Some(0.5),
            r_f: Some(0.5),
            t_submitted: sub,
            t_assessed: Some(sub + 7),
            t_confirmed: conf,
            block_index: conf.map(|_| 1),
            l_edge: 2,
            l_ai: 5,
            retries: 0,
            outcome: None,
        }
    }

    #[test]
    fn timing_decomposition() {
        let lcs = [lc(1, Some(false), Decision::Accept, 1000, Some(7000))];
        let t = timing(&lcs, &[12, 49]);
        assert_eq!(t.tc.unwrap().mean, 6000.0);
        assert_eq!(t.latency.l_blockchain_sum, 5993);
        assert_eq!(t.latency.l_total_sum, 6000);
        assert_eq!(t.db.unwrap().max, 49);
    }

    #[test]
    fn missing_label_named() {
        let lcs = [lc(1, Some(false), Decision::Accept, 0, None), lc(2, None, Decision::Reject, 0, None)];
        assert!(matches!(confusion(&lcs, PositiveRule::Reject), Err(Error::MissingLabel(2))));
    }

    #[test]
    fn report_surfaces_undefined_precision() {
        let lcs = [lc(1, Some(false), Decision::Accept, 0, Some(100)), lc(2, Some(true), Decision::Monitor, 0, Some(100))];
        let r = MetricsReport::compute("x", 1, &lcs, &[10], 1, PositiveRule::Reject).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.undefined, vec!["precision".to_string()]);
        assert_eq!(r.accuracy, Some(0.5));
        let r = MetricsReport::compute("x", 1, &lcs, &[10], 1, PositiveRule::RejectOrMonitor).unwrap();
        assert_eq!(r.precision, Some(1.0));
        let json = serde_json::to_string(&MetricsReport::compute("x", 1, &lcs, &[10], 1, PositiveRule::Reject).unwrap()).unwrap();
        assert!(json.contains("\"precision\":null"));
    }

    #[test]
    fn csv_row_matches_header() {
        let lcs = [lc(1, Some(false), Decision::Accept, 0, Some(100))];
        let r = MetricsReport::compute("S1", 1, &lcs, &[10], 1, PositiveRule::Reject).unwrap();
        assert_eq!(r.csv_row().len(), MetricsReport::CSV_HEADER.len());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
