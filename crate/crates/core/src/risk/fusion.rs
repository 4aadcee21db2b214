//! Score fusion and the tri-level decision.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Weight of the statistical score; the fuzzy score gets `1 - lambda`.
    pub lambda: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { lambda: 0.6, eta1: 0.3, eta2: 0.7 }
    }
}

impl FusionConfig {
    pub fn new(lambda: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let cfg = FusionConfig { lambda, eta1, eta2 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(0.0 <= self.eta1 && self.eta1 < self.eta2 && self.eta2 <= 1.0) {
            return Err(Error::config(format!(
                "thresholds must satisfy 0 <= eta1 < eta2 <= 1 (got eta1={}, eta2={})",
                self.eta1, self.eta2
            )));
        }
        Ok(())
    }

    pub fn fuse(&self, r_ml: f64, r_f: f64) -> f64 {
        self.lambda * r_ml + (1.0 - self.lambda) * r_f
    }

    pub fn decide(&self, r: f64) -> Decision {
        if r >= self.eta2 {
            Decision::Reject
        } else if r >= self.eta1 {
            Decision::Monitor
        } else {
            Decision::Accept
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Monitor,
    Reject,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::Accept, Decision::Monitor, Decision::Reject];

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Monitor => "monitor",
            Decision::Reject => "reject",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
