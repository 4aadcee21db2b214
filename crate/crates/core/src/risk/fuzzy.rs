//! Zero-order Sugeno rule base with adaptive rule weights.
//!
//! The fuzzy score is the firing-strength-weighted mean of rule weights:
//!
//! ```text
//! R_f = sum_k w_k * beta_k / sum_k beta_k,   beta_k = prod_j mu_{A_j^k}(z_j)
//! ```
//!
//! Rule weights double as the numeric consequent risk level of each rule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RULE_BASE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Low,
    Medium,
    High,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Low, Label::Medium, Label::High];

    fn index(self) -> usize {
        self as usize
    }
}

/// Triangular membership function on the normalized axis. `a == b` gives a
/// left shoulder (1 for all `z <= b`), `b == c` a right shoulder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self> {
        let mf = MembershipFunction { a, b, c };
        mf.validate()?;
        Ok(mf)
    }

    pub fn validate(&self) -> Result<()> {
        let MembershipFunction { a, b, c } = *self;
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || !(a <= b && b <= c) || a >= c {
            return Err(Error::config(format!("invalid triangular membership ({a}, {b}, {c})")));
        }
        Ok(())
    }

    pub fn degree(&self, z: f64) -> f64 {
        let MembershipFunction { a, b, c } = *self;
        if (a == b && z <= b) || (b == c && z >= b) || z == b {
            1.0
        } else if z <= a || z >= c {
            0.0
        } else if z < b {
            (z - a) / (b - a)
        } else {
            (c - z) / (c - b)
        }
    }

    fn breakpoints(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub name: String,
    /// Membership functions for Low, Medium, High.
    pub terms: [MembershipFunction; 3],
}

impl FuzzyVariable {
    /// Low/Medium/High with 50% overlap and saturating shoulders on `[0, 1]`.
    /// Memberships sum to 1 everywhere.
    pub fn standard(name: &str) -> Self {
        FuzzyVariable {
            name: name.to_owned(),
            terms: [
                MembershipFunction { a: 0.0, b: 0.0, c: 0.5 },
                MembershipFunction { a: 0.0, b: 0.5, c: 1.0 },
                MembershipFunction { a: 0.5, b: 1.0, c: 1.0 },
            ],
        }
    }

    pub fn degree(&self, label: Label, z: f64) -> f64 {
        self.terms[label.index()].degree(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    /// Conjunctive antecedents: variable name -> label.
    pub antecedents: BTreeMap<String, Label>,
    pub weight: f64,
}

impl FuzzyRule {
    pub fn new<'a>(antecedents: impl IntoIterator<Item = (&'a str, Label)>, weight: f64) -> Self {
        FuzzyRule {
            antecedents: antecedents.into_iter().map(|(v, l)| (v.to_owned(), l)).collect(),
            weight,
        }
    }
}

/// On-disk form of a [`RuleBase`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBaseFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub learning_rate: f64,
    pub variables: Vec<FuzzyVariable>,
    pub rules: Vec<FuzzyRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleBaseFile", into = "RuleBaseFile")]
pub struct RuleBase {
    name: String,
    pub learning_rate: f64,
    variables: Vec<FuzzyVariable>,
    rules: Vec<FuzzyRule>,
    /// Antecedents resolved to (variable index, label).
    resolved: Vec<Vec<(usize, Label)>>,
}

impl TryFrom<RuleBaseFile> for RuleBase {
    type Error = Error;

    fn try_from(f: RuleBaseFile) -> Result<Self> {
        if f.schema_version != RULE_BASE_SCHEMA {
            return Err(Error::Schema(format!(
                "rule base schema {} unsupported (expected {RULE_BASE_SCHEMA})",
                f.schema_version
            )));
        }
        let mut rb = RuleBase::new(f.variables, f.rules, f.learning_rate)?;
        rb.name = f.name;
        Ok(rb)
    }
}

impl From<RuleBase> for RuleBaseFile {
    fn from(rb: RuleBase) -> Self {
        RuleBaseFile {
            schema_version: RULE_BASE_SCHEMA,
            name: rb.name,
            learning_rate: rb.learning_rate,
            variables: rb.variables,
            rules: rb.rules,
        }
    }
}

/// Result of evaluating a rule base on one input.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyEvaluation {
    pub score: f64,
    pub strengths: Vec<f64>,
    pub total_strength: f64,
}

impl RuleBase {
    pub fn new(variables: Vec<FuzzyVariable>, rules: Vec<FuzzyRule>, learning_rate: f64) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::config("rule base needs at least one rule"));
        }
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::config("rule learning rate must be finite and non-negative"));
        }
        for v in &variables {
            v.terms.iter().try_for_each(|mf| mf.validate())?;
        }
        let mut resolved = Vec::with_capacity(rules.len());
        for (k, rule) in rules.iter().enumerate() {
            if rule.antecedents.is_empty() {
                return Err(Error::config(format!("rule {k} has no antecedents")));
            }
            if !(0.0..=1.0).contains(&rule.weight) {
                return Err(Error::config(format!("rule {k} weight {} outside [0, 1]", rule.weight)));
            }
            let mut ants = Vec::with_capacity(rule.antecedents.len());
            for (name, label) in &rule.antecedents {
                let j = variables
                    .iter()
                    .position(|v| &v.name == name)
                    .ok_or_else(|| Error::config(format!("rule {k} references unknown variable `{name}`")))?;
                ants.push((j, *label));
            }
            resolved.push(ants);
        }
        let rb = RuleBase { name: String::new(), learning_rate, variables, rules, resolved };
        if let Some(point) = rb.coverage_gap() {
            return Err(Error::config(format!("rule base leaves input {point:?} uncovered")));
        }
        Ok(rb)
    }

    /// The shipped 12-rule base over (amount, behavior, geo).
    pub fn default_rules() -> Self {
        serde_json::from_str(include_str!("../../assets/default_rulebase.json")).expect("bundled rule base is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[FuzzyVariable] {
        &self.variables
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.rules.iter().map(|r| r.weight)
    }

    /// Orders named inputs to match [`Self::variables`].
    pub fn inputs_from(&self, named: &[(&str, f64)]) -> Result<Vec<f64>> {
        self.variables
            .iter()
            .map(|v| {
                named
                    .iter()
                    .find(|(n, _)| *n == v.name)
                    .map(|(_, z)| *z)
                    .ok_or_else(|| Error::MissingVariable(v.name.clone()))
            })
            .collect()
    }

    /// Product of the antecedent membership degrees of rule `k`.
    pub fn firing_strength(&self, k: usize, inputs: &[f64]) -> Result<f64> {
        let mut beta = 1.0;
        for &(j, label) in &self.resolved[k] {
            let z = *inputs.get(j).ok_or_else(|| Error::MissingVariable(self.variables[j].name.clone()))?;
            beta *= self.variables[j].degree(label, z);
        }
        Ok(beta)
    }

    pub fn evaluate(&self, inputs: &[f64]) -> Result<FuzzyEvaluation> {
        let strengths = (0..self.rules.len()).map(|k| self.firing_strength(k, inputs)).collect::<Result<Vec<_>>>()?;
        let total: f64 = strengths.iter().sum();
        if !(total > 0.0) {
            return Err(Error::CoverageViolation);
        }
        let weighted: f64 = strengths.iter().zip(&self.rules).map(|(b, r)| b * r.weight).sum();
        Ok(FuzzyEvaluation { score: (weighted / total).clamp(0.0, 1.0), strengths, total_strength: total })
    }

    pub fn score(&self, inputs: &[f64]) -> Result<f64> {
        self.evaluate(inputs).map(|e| e.score)
    }

    /// Gradient of `0.5 * (R_f - target)^2` with respect to each rule weight.
    pub fn weight_gradient(&self, inputs: &[f64], target: f64) -> Result<Vec<f64>> {
        let e = self.evaluate(inputs)?;
        let err = e.score - target;
        Ok(e.strengths.iter().map(|b| err * b / e.total_strength).collect())
    }

    /// One gradient step on the squared error, weights clamped to `[0, 1]`.
    /// Returns the evaluation before the update.
    pub fn adapt(&mut self, inputs: &[f64], target: f64) -> Result<FuzzyEvaluation> {
        let e = self.evaluate(inputs)?;
        let err = e.score - target;
        for (rule, b) in self.rules.iter_mut().zip(&e.strengths) {
            rule.weight = (rule.weight - self.learning_rate * err * b / e.total_strength).clamp(0.0, 1.0);
        }
        Ok(e)
    }

    pub fn set_weight(&mut self, k: usize, w: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::config(format!("rule weight {w} outside [0, 1]")));
        }
        self.rules[k].weight = w;
        Ok(())
    }

    /// Finds an input in `[0, 1]^n` where no rule fires, if any.
    ///
    /// Membership degrees are piecewise linear with breakpoints at the
    /// triangle vertices, so whether a degree is positive is constant on each
    /// open interval between consecutive breakpoints. Checking every
    /// breakpoint and every interval midpoint, per variable, over the full
    /// product grid is therefore exact.
    pub fn coverage_gap(&self) -> Option<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .variables
            .iter()
            .map(|v| {
                let mut pts: Vec<f64> = v
                    .terms
                    .iter()
                    .flat_map(|t| t.breakpoints())
                    .chain([0.0, 1.0])
                    .filter(|p| (0.0..=1.0).contains(p))
                    .collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                pts.extend(mids);
                pts
            })
            .collect();

        let mut cursor = vec![0usize; axes.len()];
        loop {
            let point: Vec<f64> = cursor.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
            let fires = (0..self.rules.len()).any(|k| self.firing_strength(k, &point).unwrap_or(0.0) > 0.0);
            if !fires {
                return Some(point);
            }
            // Odometer increment.
            let mut d = 0;
            loop {
                if d == axes.len() {
                    return None;
                }
                cursor[d] += 1;
                if cursor[d] < axes[d].len() {
                    break;
                }
                cursor[d] = 0;
                d += 1;
            }
        }
    }
}
