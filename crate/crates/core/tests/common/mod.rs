//! Independent reference implementations shared by integration tests.
//!
//! Nothing here calls into the code under test for the quantity being
//! checked; helpers only build inputs through the public API.

#![allow(dead_code)]

use anfb_core::datagen::{generate, ScenarioName, ScenarioSpec};
use anfb_core::ledger::{Authority, BlockEntry, Ledger};
use anfb_core::risk::{FuzzyRule, FuzzyVariable, Label, MembershipFunction, RuleBase};
use anfb_core::tx::Transaction;
use rand::Rng;

/// Triangular membership written from the textbook definition.
pub fn tri(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let left = if a == b { if z <= b { 1.0 } else { 0.0 } } else { (z - a) / (b - a) };
    let right = if b == c { if z >= b { 1.0 } else { 0.0 } } else { (c - z) / (c - b) };
    let v = if z < b { left } else if z > b { right } else { 1.0 };
    v.clamp(0.0, 1.0)
}

/// Direct enumeration of the weighted-mean fuzzy score; `None` if no rule fires.
pub fn fuzzy_oracle(vars: &[(String, [[f64; 3]; 3])], rules: &[(Vec<(usize, usize)>, f64)], z: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ante, w) in rules {
        let mut beta = 1.0;
        for &(j, term) in ante {
            let [a, b, c] = vars[j].1[term];
            beta *= tri(a, b, c, z[j]);
        }
        num += w * beta;
        den += beta;
    }
    (den > 0.0).then(|| num / den)
}

pub const LABELS: [Label; 3] = [Label::Low, Label::Medium, Label::High];

/// Random Low/Medium/High terms on `[0, 1]`. The two shoulders overlap, so
/// "v is Low" and "v is High" together cover the whole axis.
pub fn random_terms(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let high_start = rng.random_range(0.0..0.6);
    let low_end = rng.random_range(high_start + 0.05..=1.0);
    let mut m = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
    m.sort_by(f64::total_cmp);
    if m[2] - m[0] < 1e-3 {
        m = [0.2, 0.5, 0.8];
    }
    [[0.0, 0.0, low_end], m, [high_start, 1.0, 1.0]]
}

pub struct RandomRuleBase {
    pub vars: Vec<(String, [[f64; 3]; 3])>,
    pub rules: Vec<(Vec<(usize, usize)>, f64)>,
    pub base: RuleBase,
}

/// A random rule base plus its plain-data mirror for the oracle.
pub fn random_rule_base(rng: &mut impl Rng, weight_range: (f64, f64)) -> RandomRuleBase {
    let n_vars = rng.random_range(1..=4);
    let vars: Vec<(String, [[f64; 3]; 3])> = (0..n_vars)
        .map(|j| (format!("v{j}"), random_terms(rng)))
        .collect();
    let n_rules = rng.random_range(0..=10);
    let mut rules: Vec<(Vec<(usize, usize)>, f64)> = vec![
        (vec![(0, 0)], rng.random_range(weight_range.0..=weight_range.1)),
        (vec![(0, 2)], rng.random_range(weight_range.0..=weight_range.1)),
    ];
    rules.extend((0..n_rules)
        .map(|_| {
            let mut ante = Vec::new();
            for j in 0..n_vars {
                if rng.random_bool(0.6) {
                    ante.push((j, rng.random_range(0..3)));
                }
            }
            if ante.is_empty() {
                ante.push((rng.random_range(0..n_vars), rng.random_range(0..3)));
            }
            (ante, rng.random_range(weight_range.0..=weight_range.1))
        }));
    let variables = vars
        .iter()
        .map(|(name, t)| FuzzyVariable {
            name: name.clone(),
            terms: t.map(|[a, b, c]| MembershipFunction { a, b, c }),
        })
        .collect();
    let fuzzy_rules = rules
        .iter()
        .map(|(ante, w)| FuzzyRule::new(ante.iter().map(|&(j, t)| (vars[j].0.as_str(), LABELS[t])), *w))
        .collect();
    let base = RuleBase::new(variables, fuzzy_rules, 0.1).expect("random rule base is valid");
    RandomRuleBase { vars, rules, base }
}

/// Brute-force confusion tally: (tp, tn, fp, fn).
pub fn confusion_tally(pairs: &[(bool, bool)]) -> (u64, u64, u64, u64) {
    let mut t = (0, 0, 0, 0);
    for &(label, predicted) in pairs {
        match (label, predicted) {
            (true, true) => t.0 += 1,
            (false, false) => t.1 += 1,
            (false, true) => t.2 += 1,
            (true, false) => t.3 += 1,
        }
    }
    t
}

pub fn stream(name: ScenarioName, n: usize, seed: u64) -> Vec<Transaction> {
    generate(&ScenarioSpec::preset(name, seed).with_n_tx(n)).expect("generator runs").transactions
}

/// A signed chain of `blocks` blocks with `per_block` generated entries each.
pub fn signed_chain(blocks: usize, per_block: usize, seed: u64) -> Ledger {
    let txs = stream(ScenarioName::S3, blocks * per_block, seed);
    let mut ledger = Ledger::new(Authority::derive(5, 3, seed).expect("authority"), per_block).expect("ledger");
    for (i, chunk) in txs.chunks(per_block).enumerate() {
        let entries = chunk
            .iter()
            .map(|tx| BlockEntry { tx: tx.clone(), risk: 0.25, assessed_at: tx.timestamp + 7, monitor: i % 3 == 0 })
            .collect();
        let block = ledger.seal(5_000 * (i as u64 + 1), entries, &[0, 2, 4]).expect("seal");
        ledger.append(block).expect("append");
    }
    ledger
}
