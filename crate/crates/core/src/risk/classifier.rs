//! Statistical risk model: logistic regression trained by SGD on log-loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tx::{logistic, FeatureVector, FEATURE_DIM};

/// A model that maps a feature vector to a fraud probability.
pub trait RiskModel {
    fn dim(&self) -> usize;
    fn score(&self, x: &[f64]) -> Result<f64>;
    /// One pass over `batch` in order. An empty batch is a no-op.
    fn train(&mut self, batch: &[(FeatureVector, bool)]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    /// Multiplier on the loss of positive (fraud) examples.
    pub pos_weight: f64,
    pub l2: f64,
    /// Initial bias is `logit(prior_rate)`.
    pub prior_rate: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { learning_rate: 0.05, pos_weight: 10.0, l2: 1e-4, prior_rate: 0.01 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && self.pos_weight.is_finite()
            && self.pos_weight > 0.0
            && self.l2.is_finite()
            && self.l2 >= 0.0
            && self.prior_rate > 0.0
            && self.prior_rate < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config("invalid classifier config"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub learning_rate: f64,
    pub pos_weight: f64,
    pub l2: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticClassifier {
    pub fn new(cfg: &ClassifierConfig) -> Self {
        let p = cfg.prior_rate;
        LogisticClassifier {
            weights: vec![0.0; FEATURE_DIM],
            bias: (p / (1.0 - p)).ln(),
            learning_rate: cfg.learning_rate,
            pos_weight: cfg.pos_weight,
            l2: cfg.l2,
        }
    }

    pub fn with_weights(weights: Vec<f64>, bias: f64, learning_rate: f64) -> Self {
        LogisticClassifier { weights, bias, learning_rate, pos_weight: 1.0, l2: 0.0 }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: x.len() });
        }
        Ok(())
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    fn class_weight(&self, label: bool) -> f64 {
        if label {
            self.pos_weight
        } else {
            1.0
        }
    }

    /// Weighted log-loss of one example plus the L2 penalty.
    pub fn loss(&self, x: &[f64], label: bool) -> Result<f64> {
        let z = self.margin(x)?;
        let nll = if label { softplus(-z) } else { softplus(z) };
        let penalty = 0.5 * self.l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        Ok(self.class_weight(label) * nll + penalty)
    }

    /// Gradient of [`Self::loss`] with respect to (weights, bias).
    pub fn gradient(&self, x: &[f64], label: bool) -> Result<(Vec<f64>, f64)> {
        let p = logistic(self.margin(x)?);
        let err = self.class_weight(label) * (p - if label { 1.0 } else { 0.0 });
        let gw = self.weights.iter().zip(x).map(|(w, v)| err * v + self.l2 * w).collect();
        Ok((gw, err))
    }

    pub fn step(&mut self, x: &[f64], label: bool) -> Result<()> {
        let (gw, gb) = self.gradient(x, label)?;
        for (w, g) in self.weights.iter_mut().zip(gw) {
            *w -= self.learning_rate * g;
        }
        self.bias -= self.learning_rate * gb;
        if self.weights.iter().any(|w| !w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::NonFinite("classifier weights"));
        }
        Ok(())
    }
}

impl RiskModel for LogisticClassifier {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(logistic(self.margin(x)?))
    }

    fn train(&mut self, batch: &[(FeatureVector, bool)]) -> Result<()> {
        batch.iter().try_for_each(|(fv, label)| self.step(fv.as_slice(), *label))
    }
}
