//! Cross-checks against independent reference computations.

mod common;

use std::collections::HashSet;
use std::io::Write;

use anfb_core::consensus::{honest_verdict, tally, FaultMode, Network, NetworkConfig, ValidationRules};
use anfb_core::datagen::{generate, load_csv, write_csv, ScenarioName, ScenarioSpec, SchemaMap};
use anfb_core::ledger::{serialize_block, sha256, tamper, BlockEntry, Ledger, TamperField, ZERO_HASH};
use anfb_core::metrics::{confusion, nearest_rank, MetricsReport, PositiveRule, Summary};
use anfb_core::pipeline::{Outcome, TxLifecycle};
use anfb_core::risk::{Decision, FusionConfig, FuzzyRule, FuzzyVariable, Label, LogisticClassifier, MembershipFunction, RuleBase};
use anfb_core::run::{simulate, RunConfig};
use anfb_core::tx::{AccountId, BehaviorVector, Geo, ProfileConfig, Transaction, UserProfile};
use anfb_core::Error;
use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn membership_matches_textbook_triangle() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..2000 {
        let t = random_terms(&mut rng);
        for [a, b, c] in t {
            let mf = MembershipFunction::triangular(a, b, c).unwrap();
            for z in [rng.random::<f64>(), a, b, c, -0.5, 1.5] {
                assert_eq!(mf.degree(z), tri(a, b, c, z), "({a},{b},{c}) at {z}");
            }
        }
    }
}

#[test]
fn fuzzy_score_matches_enumeration() {
    let mut rng = StdRng::seed_from_u64(2);
    for _ in 0..500 {
        let rb = random_rule_base(&mut rng, (0.0, 1.0));
        let z: Vec<f64> = (0..rb.vars.len()).map(|_| rng.random()).collect();
        let want = fuzzy_oracle(&rb.vars, &rb.rules, &z).expect("covered base fires");
        let got = rb.base.score(&z).unwrap();
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn unfired_input_is_a_coverage_violation() {
    let rules = Label::ALL.iter().map(|&l| FuzzyRule::new([("x", l)], 0.5)).collect();
    let rb = RuleBase::new(vec![FuzzyVariable::standard("x")], rules, 0.1).unwrap();
    assert!(rb.score(&[2.0]).is_ok());
    assert!(matches!(rb.score(&[f64::NAN]), Err(Error::CoverageViolation)));
}

/// `0.5 * (R_f - target)^2` from the enumeration oracle.
fn fuzzy_loss(rb: &RandomRuleBase, weights: &[f64], z: &[f64], target: f64) -> f64 {
    let rules: Vec<_> = rb.rules.iter().zip(weights).map(|((a, _), w)| (a.clone(), *w)).collect();
    let r = fuzzy_oracle(&rb.vars, &rules, z).unwrap();
    0.5 * (r - target).powi(2)
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

#[test]
fn rule_weight_gradient_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..200 {
        let rb = random_rule_base(&mut rng, (0.05, 0.95));
        let z: Vec<f64> = (0..rb.vars.len()).map(|_| rng.random()).collect();
        let target = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let grad = rb.base.weight_gradient(&z, target).unwrap();
        let w: Vec<f64> = rb.base.weights().collect();
        let h = 1e-4;
        for k in 0..w.len() {
            let (mut up, mut dn) = (w.clone(), w.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (fuzzy_loss(&rb, &up, &z, target) - fuzzy_loss(&rb, &dn, &z, target)) / (2.0 * h);
            assert!(close(grad[k], fd, 1e-6, 1e-10), "rule {k}: {} vs {fd}", grad[k]);
        }
        let mut adapted = rb.base.clone();
        adapted.adapt(&z, target).unwrap();
        for (k, (before, after)) in w.iter().zip(adapted.weights()).enumerate() {
            let want = (before - 0.1 * grad[k]).clamp(0.0, 1.0);
            assert!((after - want).abs() < 1e-14, "rule {k}");
        }
    }
}

#[test]
fn adapt_keeps_weights_in_unit_interval() {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..100 {
        let mut rb = random_rule_base(&mut rng, (0.0, 1.0)).base;
        for _ in 0..50 {
            let z: Vec<f64> = (0..rb.variables().len()).map(|_| rng.random()).collect();
            rb.adapt(&z, if rng.random_bool(0.5) { 1.0 } else { 0.0 }).unwrap();
        }
        assert!(rb.weights().all(|w| (0.0..=1.0).contains(&w)));
    }
}

/// Log-loss written directly from the definition.
fn log_loss(w: &[f64], b: f64, x: &[f64], label: bool, pos_weight: f64, l2: f64) -> f64 {
    let z: f64 = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
    let p = 1.0 / (1.0 + (-z).exp());
    let nll = if label { -p.ln() } else { -(1.0 - p).ln() };
    let cw = if label { pos_weight } else { 1.0 };
    cw * nll + 0.5 * l2 * w.iter().map(|a| a * a).sum::<f64>()
}

#[test]
fn classifier_gradient_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..200 {
        let d = 7;
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-3.0..1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let label = rng.random_bool(0.3);
        let mut m = LogisticClassifier::with_weights(w.clone(), b, 0.05);
        m.pos_weight = rng.random_range(1.0..20.0);
        m.l2 = rng.random_range(0.0..0.01);
        let loss = m.loss(&x, label).unwrap();
        assert!(close(loss, log_loss(&w, b, &x, label, m.pos_weight, m.l2), 1e-12, 1e-14));
        let (gw, gb) = m.gradient(&x, label).unwrap();
        let h = 1e-5;
        for k in 0..d {
            let (mut up, mut dn) = (w.clone(), w.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (log_loss(&up, b, &x, label, m.pos_weight, m.l2) - log_loss(&dn, b, &x, label, m.pos_weight, m.l2)) / (2.0 * h);
            assert!(close(gw[k], fd, 1e-6, 1e-9), "w{k}: {} vs {fd}", gw[k]);
        }
        let fd = (log_loss(&w, b + h, &x, label, m.pos_weight, m.l2) - log_loss(&w, b - h, &x, label, m.pos_weight, m.l2)) / (2.0 * h);
        assert!(close(gb, fd, 1e-6, 1e-9), "bias: {gb} vs {fd}");
    }
}

proptest! {
    #[test]
    fn fusion_endpoints_are_exact(r_ml in 0.0f64..=1.0, r_f in 0.0f64..=1.0) {
        let ml = FusionConfig::new(1.0, 0.3, 0.7).unwrap();
        let fz = FusionConfig::new(0.0, 0.3, 0.7).unwrap();
        prop_assert_eq!(ml.fuse(r_ml, r_f).to_bits(), r_ml.to_bits());
        prop_assert_eq!(fz.fuse(r_ml, r_f).to_bits(), r_f.to_bits());
    }

    #[test]
    fn fused_score_lies_between_inputs(r_ml in 0.0f64..=1.0, r_f in 0.0f64..=1.0, lambda in 0.0f64..=1.0) {
        let r = FusionConfig::new(lambda, 0.3, 0.7).unwrap().fuse(r_ml, r_f);
        prop_assert!(r >= r_ml.min(r_f) - 1e-15 && r <= r_ml.max(r_f) + 1e-15);
    }

    #[test]
    fn decision_bands_are_closed_below(eta1 in 0.0f64..0.5, gap in 0.01f64..0.5, r in 0.0f64..=1.0) {
        let f = FusionConfig::new(eta1, eta1, eta1 + gap).unwrap();
        let want = if r >= f.eta2 { Decision::Reject } else if r >= f.eta1 { Decision::Monitor } else { Decision::Accept };
        prop_assert_eq!(f.decide(r), want);
        prop_assert_eq!(f.decide(f.eta2), Decision::Reject);
        prop_assert_eq!(f.decide(f.eta1), Decision::Monitor);
    }
}

fn lifecycle(tx_id: u64, label: bool, decision: Decision) -> TxLifecycle {
    TxLifecycle {
        tx_id,
        label: Some(label),
        warmup: false,
        decision: Some(decision),
        r: None,
        r_ml: None,
        r_f: None,
        t_submitted: 0,
        t_assessed: None,
        t_confirmed: None,
        block_index: None,
        l_edge: 0,
        l_ai: 0,
        retries: 0,
        outcome: None,
    }
}

fn decision_strategy() -> impl Strategy<Value = Decision> {
    prop_oneof![Just(Decision::Accept), Just(Decision::Monitor), Just(Decision::Reject)]
}

proptest! {
    #[test]
    fn confusion_matches_tally(pairs in prop::collection::vec((any::<bool>(), decision_strategy()), 0..300)) {
        let lcs: Vec<_> = pairs.iter().enumerate().map(|(i, &(l, d))| lifecycle(i as u64, l, d)).collect();
        for rule in [PositiveRule::Reject, PositiveRule::RejectOrMonitor] {
            let flat: Vec<(bool, bool)> = pairs.iter().map(|&(l, d)| (l, rule.is_positive(d))).collect();
            let (tp, tn, fp, fn_) = confusion_tally(&flat);
            let cm = confusion(&lcs, rule).unwrap();
            prop_assert_eq!((cm.tp, cm.tn, cm.fp, cm.fn_), (tp, tn, fp, fn_));
        }
    }

    /// Counting Monitor as positive never loses a true positive or gains a false negative.
    #[test]
    fn wider_positive_rule_is_monotone(pairs in prop::collection::vec((any::<bool>(), decision_strategy()), 1..300)) {
        let lcs: Vec<_> = pairs.iter().enumerate().map(|(i, &(l, d))| lifecycle(i as u64, l, d)).collect();
        let narrow = confusion(&lcs, PositiveRule::Reject).unwrap();
        let wide = confusion(&lcs, PositiveRule::RejectOrMonitor).unwrap();
        prop_assert!(wide.tp >= narrow.tp && wide.fp >= narrow.fp);
        prop_assert!(wide.fn_ <= narrow.fn_ && wide.tn <= narrow.tn);
        let recall = |c: &anfb_core::metrics::ConfusionMatrix| c.recall().ok();
        if let (Some(a), Some(b)) = (recall(&narrow), recall(&wide)) {
            prop_assert!(b >= a);
        }
    }
}

#[test]
fn warmup_and_undecided_are_excluded_and_missing_labels_rejected() {
    let mut lcs = vec![lifecycle(1, true, Decision::Reject), lifecycle(2, false, Decision::Accept)];
    let mut warm = lifecycle(3, true, Decision::Accept);
    warm.warmup = true;
    let mut undecided = lifecycle(4, true, Decision::Accept);
    undecided.decision = None;
    lcs.extend([warm, undecided]);
    let cm = confusion(&lcs, PositiveRule::Reject).unwrap();
    assert_eq!((cm.tp, cm.tn, cm.fp, cm.fn_), (1, 1, 0, 0));
    let mut unlabeled = lifecycle(5, false, Decision::Accept);
    unlabeled.label = None;
    lcs.push(unlabeled);
    assert!(matches!(confusion(&lcs, PositiveRule::Reject), Err(Error::MissingLabel(5))));
}

#[test]
fn undefined_metrics_are_reported_not_defaulted() {
    let lcs = vec![lifecycle(1, false, Decision::Accept), lifecycle(2, false, Decision::Monitor)];
    let r = MetricsReport::compute("S1", 0, &lcs, &[], 0, PositiveRule::Reject).unwrap();
    assert_eq!(r.accuracy, Some(1.0));
    assert_eq!((r.precision, r.recall, r.f1), (None, None, None));
    assert_eq!(r.undefined, ["precision", "recall", "f1"]);
    let r = MetricsReport::compute("S1", 0, &[], &[], 0, PositiveRule::Reject).unwrap();
    assert_eq!(r.undefined, ["accuracy", "precision", "recall", "f1"]);
    assert!(r.timing.tc.is_none() && r.timing.db.is_none());
}

proptest! {
    #[test]
    fn nearest_rank_matches_definition(mut xs in prop::collection::vec(0u64..10_000, 1..200), q in 0.01f64..=1.0) {
        xs.sort_unstable();
        // Smallest value with at least q*n samples at or below it.
        let want = *xs.iter().find(|&&v| xs.iter().filter(|&&u| u <= v).count() as f64 >= q * xs.len() as f64).unwrap();
        prop_assert_eq!(nearest_rank(&xs, q), want);
        let s = Summary::of(&xs).unwrap();
        prop_assert_eq!((s.min, s.max), (xs[0], *xs.last().unwrap()));
        let mean = xs.iter().map(|&v| v as f64).sum::<f64>() / xs.len() as f64;
        prop_assert!((s.mean - mean).abs() <= 1e-9 * mean.max(1.0));
    }
}

#[test]
fn consensus_verdicts_match_popcount_through_the_network() {
    for threshold in 1..=5 {
        for pattern in 0u32..32 {
            let faults = (0..5).map(|i| if pattern >> i & 1 == 1 { FaultMode::Honest } else { FaultMode::AlwaysReject }).collect();
            let cfg = NetworkConfig { nodes: 5, threshold, faults, ..NetworkConfig::default() };
            let mut net = Network::new(&cfg, u64::from(pattern)).unwrap();
            let ledger = Ledger::new(net.authority().clone(), 10).unwrap();
            let tx = stream(ScenarioName::S1, 1, 9).remove(0);
            let mut block = ledger.propose(100, vec![BlockEntry { tx, risk: 0.1, assessed_at: 50, monitor: false }]).unwrap();
            let rules = ValidationRules { expected_prev_hash: ledger.tip().hash, reject_threshold: 0.7, max_block_txs: 10 };
            assert!(honest_verdict(&block, &rules));
            let rec = net.run_consensus(&mut block, &rules, u64::from(pattern), 100);
            let approvals = pattern.count_ones() as usize;
            assert_eq!(rec.approvals, approvals);
            assert_eq!(rec.valid, approvals >= threshold, "pattern {pattern:05b} threshold {threshold}");
            let votes: Vec<bool> = rec.votes.iter().map(|v| v.approve).collect();
            assert_eq!(tally(&votes, threshold), rec.valid);
            assert_eq!(block.signatures.len(), approvals);
            assert_eq!(net.authority().check_signatures(block.index, &block.hash, &block.signatures).is_ok(), rec.valid);
            assert!(rec.votes.iter().all(|v| v.returned_at <= rec.decided_at && v.received_at >= rec.proposed_at));
        }
    }
}

#[test]
fn honest_validators_reject_invalid_candidates() {
    let ledger = signed_chain(3, 4, 1);
    let good = ledger.propose(99_000, ledger.blocks()[1].entries.clone()).unwrap();
    let rules = ValidationRules { expected_prev_hash: ledger.tip().hash, reject_threshold: 0.7, max_block_txs: 4 };
    assert!(honest_verdict(&good, &rules));
    let mut risky = good.clone();
    risky.entries[0].risk = 0.7;
    risky.hash = risky.compute_hash().unwrap();
    assert!(!honest_verdict(&risky, &rules));
    let mut stale = good.clone();
    stale.prev_hash = ZERO_HASH;
    stale.hash = stale.compute_hash().unwrap();
    assert!(!honest_verdict(&stale, &rules));
    let mut forged = good.clone();
    forged.hash[0] ^= 1;
    assert!(!honest_verdict(&forged, &rules));
    let oversized = ledger.propose(99_000, [ledger.blocks()[1].entries.clone(), ledger.blocks()[2].entries.clone()].concat()).unwrap();
    assert!(!honest_verdict(&oversized, &rules));
}

/// Running mean and variance of an account's amounts.
fn batch_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

proptest! {
    #[test]
    fn streaming_moments_match_batch(amounts in prop::collection::vec(0.0f64..1e6, 1..100)) {
        let cfg = ProfileConfig::default();
        let mut p = UserProfile::new(AccountId("u".into()));
        for (i, &amount) in amounts.iter().enumerate() {
            let tx = Transaction {
                tx_id: i as u64,
                sender: "u".into(),
                receiver: "v".into(),
                amount,
                timestamp: i as u64 * 1000,
                geo: Geo::region(0),
                device: 1,
                behavior: BehaviorVector::default(),
                label: None,
            };
            p.update(&tx, &cfg).unwrap();
        }
        let (mean, var) = batch_moments(&amounts);
        prop_assert!((p.mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        prop_assert!((p.variance() - var).abs() <= 1e-7 * var.max(1.0));
    }
}

/// Encodes the fixed golden block by hand, field by field.
fn golden_entry() -> BlockEntry {
    BlockEntry {
        tx: Transaction {
            tx_id: 7,
            sender: "acct-0001".into(),
            receiver: "acct-0042".into(),
            amount: 1234.5,
            timestamp: 86_400_123,
            geo: Geo::at(3, 48.8566, 2.3522),
            device: 99,
            behavior: BehaviorVector { tx_rate: 2.0, amount_zscore: -0.75, device_consistency: 0.5, geo_jump: true, dormancy_gap: 12.25 },
            label: Some(true),
        },
        risk: 0.625,
        assessed_at: 86_400_130,
        monitor: true,
    }
}

fn golden_bytes(prev: &[u8; 32]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend(5u64.to_be_bytes());
    b.extend(10_000u64.to_be_bytes());
    b.extend(prev);
    b.extend(1u32.to_be_bytes());
    b.extend(7u64.to_be_bytes());
    for s in ["acct-0001", "acct-0042"] {
        b.extend((s.len() as u32).to_be_bytes());
        b.extend(s.as_bytes());
    }
    b.extend(1234.5f64.to_bits().to_be_bytes());
    b.extend(86_400_123u64.to_be_bytes());
    b.extend(3u16.to_be_bytes());
    b.push(1);
    b.extend(48.8566f64.to_bits().to_be_bytes());
    b.extend(2.3522f64.to_bits().to_be_bytes());
    b.extend(99u32.to_be_bytes());
    for v in [2.0f64, -0.75, 0.5] {
        b.extend(v.to_bits().to_be_bytes());
    }
    b.push(1);
    b.extend(12.25f64.to_bits().to_be_bytes());
    b.push(0x01);
    b.extend(0.625f64.to_bits().to_be_bytes());
    b.extend(86_400_130u64.to_be_bytes());
    b.push(1);
    b
}

#[test]
fn codec_matches_golden_vector() {
    let prev: [u8; 32] = std::array::from_fn(|i| i as u8);
    let want = golden_bytes(&prev);
    assert_eq!(serialize_block(5, 10_000, &prev, &[golden_entry()]).unwrap(), want);
    let hash = anfb_core::ledger::block_hash(5, 10_000, &prev, &[golden_entry()]).unwrap();
    let mut h = <sha2::Sha256 as sha2::Digest>::new();
    sha2::Digest::update(&mut h, &want);
    sha2::Digest::update(&mut h, prev);
    let independent: [u8; 32] = sha2::Digest::finalize(h).into();
    assert_eq!(hash, independent);
    assert_eq!(hash, sha256(&[&want, &prev]));
    let frozen = include_str!("data/golden_block_hash.hex").trim();
    assert_eq!(hex::encode(hash), frozen, "canonical encoding changed");
}

#[test]
fn non_finite_floats_do_not_encode() {
    let mut e = golden_entry();
    e.risk = f64::NAN;
    assert!(matches!(serialize_block(1, 0, &ZERO_HASH, &[e]), Err(Error::NonFinite("risk"))));
}

#[test]
fn every_single_field_tamper_is_caught_at_or_before_its_block() {
    let ledger = signed_chain(30, 3, 11);
    let mut rng = StdRng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 300 {
        let index = rng.random_range(0..ledger.len() as u64);
        let field = TamperField::ALL[rng.random_range(0..TamperField::ALL.len())];
        let entry = rng.random_range(0..3);
        let mut bad = ledger.clone();
        if tamper(&mut bad, index, entry, field, rng.random_range(0..256)).is_err() {
            continue;
        }
        let fault = bad.verify_chain().expect_err("tampering must be detected");
        assert!(fault.index <= index, "{field} at {index} reported at {}", fault.index);
        checked += 1;
    }
    assert!(ledger.verify_chain().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn csv_round_trip_preserves_stream(seed in 0u64..1000, n in 1usize..400) {
        let stream = generate(&ScenarioSpec::preset(ScenarioName::S3, seed).with_n_tx(n)).unwrap();
        let mut file = tempfile::NamedTempFile::new().unwrap();
        let mut buf = Vec::new();
        write_csv(&stream, &mut buf).unwrap();
        file.write_all(&buf).unwrap();
        let back = load_csv(file.path(), &SchemaMap::default(), &ProfileConfig::default()).unwrap();
        prop_assert_eq!(back.transactions, stream.transactions);
    }
}

#[test]
fn pipeline_conserves_transactions_and_keeps_rejects_off_chain() {
    let mut cfg = RunConfig::default();
    cfg.scenario.name = ScenarioName::S3;
    cfg.scenario.n_tx = Some(3000);
    cfg.seed = 17;
    cfg.warm_start.epochs = 3;
    let o = simulate(&cfg).unwrap();
    let a = &o.artifacts;
    let eta2 = cfg.engine.fusion.eta2;
    assert!(a.ledger.verify_chain().is_ok());
    assert!(a.incidents.verify().is_ok());

    let outcome = |k: Outcome| a.lifecycles.iter().filter(|l| l.outcome == Some(k)).count();
    assert_eq!(outcome(Outcome::Committed) + outcome(Outcome::Incident) + outcome(Outcome::Failed), cfg.scenario.n_tx.unwrap());
    assert_eq!(outcome(Outcome::Committed), a.ledger.tx_count());
    assert_eq!(outcome(Outcome::Incident), a.incidents.len());

    let mut seen = HashSet::new();
    for block in a.ledger.blocks() {
        for e in &block.entries {
            assert!(e.risk < eta2, "tx {} with R={} committed", e.tx.tx_id, e.risk);
            assert!(seen.insert(e.tx.tx_id), "tx {} in two blocks", e.tx.tx_id);
        }
    }
    for lc in &a.lifecycles {
        let r = lc.r.unwrap();
        assert_eq!(lc.decision == Some(Decision::Reject), r >= eta2);
        assert_eq!(lc.outcome == Some(Outcome::Committed), seen.contains(&lc.tx_id));
        if let Some(t) = lc.t_confirmed {
            let assessed = lc.t_assessed.unwrap();
            assert!(lc.t_submitted <= assessed && assessed <= t);
            let block = &a.ledger.blocks()[lc.block_index.unwrap() as usize];
            assert!(block.entries.iter().any(|e| e.tx.tx_id == lc.tx_id));
        }
    }
}
