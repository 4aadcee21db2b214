//! End-to-end assessment of one transaction, with optional online learning.

use serde::{Deserialize, Serialize};

use super::classifier::{ClassifierConfig, LogisticClassifier, RiskModel};
use super::fusion::{Decision, FusionConfig};
use super::fuzzy::RuleBase;
use crate::error::Result;
use crate::tx::{featurize, idx, FeatureConfig, FeatureVector, Transaction};

/// Names of the fuzzy inputs derived from a feature vector.
pub const FUZZY_INPUTS: [&str; 3] = ["amount", "behavior", "geo"];

/// Fuzzy inputs: normalized amount, composite behavior score, geo jump.
///
/// The behavior score is the mean of the rate, deviation, device-change and
/// dormancy components, each already on `[0, 1]`. The deviation component
/// `logistic(|z|)` lives on `[0.5, 1)` and is stretched back onto `[0, 1)`.
pub fn fuzzy_inputs(fv: &FeatureVector) -> [f64; 3] {
    let f = &fv.0;
    let deviation = (2.0 * (f[idx::ZSCORE] - 0.5)).clamp(0.0, 1.0);
    let behavior = (f[idx::RATE] + deviation + (1.0 - f[idx::DEVICE]) + f[idx::DORMANCY]) / 4.0;
    [f[idx::AMOUNT], behavior, f[idx::GEO]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub classifier: ClassifierConfig,
    pub fusion: FusionConfig,
    pub features: FeatureConfig,
    /// Learn from labeled transactions right after scoring them.
    pub online_learning: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            classifier: ClassifierConfig::default(),
            fusion: FusionConfig::default(),
            features: FeatureConfig::default(),
            online_learning: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        self.fusion.validate()?;
        self.features.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub strength: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub tx_id: u64,
    pub r_ml: f64,
    pub r_f: f64,
    pub r: f64,
    pub decision: Decision,
    /// Fuzzy inputs in rule-base variable order.
    pub inputs: Vec<f64>,
    /// Per-rule firing strength and weight at scoring time.
    pub trace: Vec<RuleTrace>,
}

impl RiskAssessment {
    /// Recomputes the fuzzy score from the trace.
    pub fn trace_score(&self) -> f64 {
        let total: f64 = self.trace.iter().map(|t| t.strength).sum();
        self.trace.iter().map(|t| t.strength * t.weight).sum::<f64>() / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEngine<M = LogisticClassifier> {
    pub classifier: M,
    pub rules: RuleBase,
    pub fusion: FusionConfig,
    pub features: FeatureConfig,
    pub online_learning: bool,
}

impl RiskEngine<LogisticClassifier> {
    pub fn new(cfg: &EngineConfig, rules: RuleBase) -> Result<Self> {
        cfg.validate()?;
        Ok(RiskEngine {
            classifier: LogisticClassifier::new(&cfg.classifier),
            rules,
            fusion: cfg.fusion,
            features: cfg.features,
            online_learning: cfg.online_learning,
        })
    }
}

impl<M: RiskModel> RiskEngine<M> {
    pub fn with_model(classifier: M, rules: RuleBase, cfg: &EngineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(RiskEngine { classifier, rules, fusion: cfg.fusion, features: cfg.features, online_learning: cfg.online_learning })
    }

    fn rule_inputs(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        let [amount, behavior, geo] = fuzzy_inputs(fv);
        let named = [
            (FUZZY_INPUTS[0], amount),
            (FUZZY_INPUTS[1], behavior),
            (FUZZY_INPUTS[2], geo),
            ("hour_night", fv.0[idx::HOUR]),
            ("tx_rate", fv.0[idx::RATE]),
            ("amount_zscore", fv.0[idx::ZSCORE]),
            ("device_consistency", fv.0[idx::DEVICE]),
            ("dormancy", fv.0[idx::DORMANCY]),
        ];
        self.rules.inputs_from(&named)
    }

    /// Scores a featurized transaction against the current (frozen) state.
    pub fn assess_features(&self, tx_id: u64, fv: &FeatureVector) -> Result<RiskAssessment> {
        let r_ml = self.classifier.score(fv.as_slice())?;
        let inputs = self.rule_inputs(fv)?;
        let eval = self.rules.evaluate(&inputs)?;
        let r = self.fusion.fuse(r_ml, eval.score);
        let trace = eval
            .strengths
            .iter()
            .zip(self.rules.weights())
            .map(|(&strength, weight)| RuleTrace { strength, weight })
            .collect();
        Ok(RiskAssessment { tx_id, r_ml, r_f: eval.score, r, decision: self.fusion.decide(r), inputs, trace })
    }

    pub fn assess(&self, tx: &Transaction) -> Result<RiskAssessment> {
        let fv = featurize(tx, &self.features)?;
        self.assess_features(tx.tx_id, &fv)
    }

    /// One classifier step and one rule-weight step on a labeled example.
    pub fn learn_features(&mut self, fv: &FeatureVector, label: bool) -> Result<()> {
        self.classifier.train(&[(*fv, label)])?;
        let inputs = self.rule_inputs(fv)?;
        self.rules.adapt(&inputs, if label { 1.0 } else { 0.0 })?;
        Ok(())
    }

    /// Scores `tx`, then learns from it if it is labeled and online learning
    /// is on. The returned assessment reflects the state before learning.
    pub fn assess_and_learn(&mut self, tx: &Transaction) -> Result<RiskAssessment> {
        let fv = featurize(tx, &self.features)?;
        let a = self.assess_features(tx.tx_id, &fv)?;
        if let (true, Some(label)) = (self.online_learning, tx.label) {
            self.learn_features(&fv, label)?;
        }
        Ok(a)
    }

    /// Offline training: `epochs` passes over the labeled transactions.
    pub fn train_offline(&mut self, txs: &[Transaction], epochs: usize) -> Result<()> {
        let labeled = txs
            .iter()
            .filter_map(|tx| tx.label.map(|l| featurize(tx, &self.features).map(|fv| (fv, l))))
            .collect::<Result<Vec<_>>>()?;
        for _ in 0..epochs {
            for (fv, label) in &labeled {
                self.learn_features(fv, *label)?;
            }
        }
        Ok(())
    }
}
