//! Discrete-event transaction pipeline.
//!
//! Each transaction arrives at its timestamp, is scored by the risk engine
//! and becomes available `l_edge + l_ai` virtual ms later. Rejected
//! transactions go to the incident log and never reach consensus; accepted
//! and monitored ones wait in the mempool. A block is proposed when the
//! mempool holds `block_size` transactions or at the next multiple of
//! `block_interval`, whichever comes first, with at most one block in
//! consensus at a time. A committed block is broadcast from its leader, and
//! its transactions are confirmed once the last node has received it. A
//! discarded block's transactions return to the front of the mempool until
//! they exceed the retry limit.

pub mod incident;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::consensus::{Broadcast, Network, SimClock, ValidationRules, VoteRecord};
use crate::error::{Error, Result};
use crate::ledger::{Block, BlockEntry, Hash32, Ledger};
use crate::risk::{Decision, RiskAssessment, RiskEngine, RiskModel};
use crate::tx::Transaction;

pub use incident::{IncidentLog, IncidentRecord, INCIDENT_SCHEMA};

/// Configured block-size range; values outside need `relax_bounds`.
pub const BLOCK_SIZE_RANGE: (usize, usize) = (50, 100);
/// Configured block-interval range in ms; values outside need `relax_bounds`.
pub const BLOCK_INTERVAL_RANGE: (u64, u64) = (5_000, 10_000);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub block_size: usize,
    pub block_interval: u64,
    /// Virtual ingestion cost per transaction, ms.
    pub l_edge: u64,
    /// Virtual scoring cost per transaction, ms.
    pub l_ai: u64,
    /// Times a transaction may be re-queued after its block is discarded.
    pub max_retries: u32,
    /// Allow block size and interval outside the standard ranges.
    pub relax_bounds: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { block_size: 50, block_interval: 5_000, l_edge: 2, l_ai: 5, max_retries: 1, relax_bounds: false }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.block_interval == 0 {
            return Err(Error::config("block size and block interval must be positive"));
        }
        if !self.relax_bounds {
            let (lo, hi) = BLOCK_SIZE_RANGE;
            if !(lo..=hi).contains(&self.block_size) {
                return Err(Error::config(format!(
                    "block size {} outside [{lo}, {hi}] (set relax_bounds to override)",
                    self.block_size
                )));
            }
            let (lo, hi) = BLOCK_INTERVAL_RANGE;
            if !(lo..=hi).contains(&self.block_interval) {
                return Err(Error::config(format!(
                    "block interval {} ms outside [{lo}, {hi}] (set relax_bounds to override)",
                    self.block_interval
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Committed,
    Incident,
    /// Dropped after exhausting block retries, or not assessable.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxLifecycle {
    pub tx_id: u64,
    pub label: Option<bool>,
    /// Part of the warm-start prefix; excluded from detection metrics.
    pub warmup: bool,
    pub decision: Option<Decision>,
    pub r: Option<f64>,
    pub r_ml: Option<f64>,
    pub r_f: Option<f64>,
    pub t_submitted: u64,
    pub t_assessed: Option<u64>,
    pub t_confirmed: Option<u64>,
    pub block_index: Option<u64>,
    pub l_edge: u64,
    pub l_ai: u64,
    pub retries: u32,
    pub outcome: Option<Outcome>,
}

impl TxLifecycle {
    pub fn confirmation_time(&self) -> Option<u64> {
        self.t_confirmed.map(|t| t - self.t_submitted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTx {
    pub tx_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Submit { tx_id: u64 },
    Assess { tx_id: u64, decision: Decision, r: f64 },
    Incident { tx_id: u64, seq: u64 },
    Propose { block_index: u64, round: u64, leader: u32, tx_ids: Vec<u64> },
    Vote { block_index: u64, node: u32, approve: bool, received_at: u64, voted_at: u64 },
    Decide { block_index: u64, approvals: usize, threshold: usize, valid: bool },
    Commit { block_index: u64, hash: String },
    Discard { block_index: u64, requeued: Vec<u64>, failed: Vec<u64> },
    Broadcast { block_index: u64, sender: u32 },
    Receive { block_index: u64, node: u32 },
    Error { tx_id: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// A monitored transaction exported for offline review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub assessed_at: u64,
    pub transaction: Transaction,
    pub assessment: RiskAssessment,
}

pub struct RunArtifacts<M> {
    pub ledger: Ledger,
    pub incidents: IncidentLog,
    pub lifecycles: Vec<TxLifecycle>,
    pub events: Vec<Event>,
    pub votes: Vec<VoteRecord>,
    pub broadcasts: Vec<Broadcast>,
    pub failures: Vec<FailedTx>,
    pub review: Vec<ReviewItem>,
    pub engine: RiskEngine<M>,
}

impl<M> RunArtifacts<M> {
    pub fn decision_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.lifecycles {
            match l.decision {
                Some(Decision::Accept) => c[0] += 1,
                Some(Decision::Monitor) => c[1] += 1,
                Some(Decision::Reject) => c[2] += 1,
                None => {}
            }
        }
        c
    }
}

/// Trains on a labeled prefix before live processing. Unlabeled
/// transactions are skipped; an empty prefix leaves the engine unchanged.
pub fn warm_start<M: RiskModel>(engine: &mut RiskEngine<M>, prefix: &[Transaction], epochs: usize) -> Result<()> {
    engine.train_offline(prefix, epochs)
}

enum Ev {
    Arrival(usize),
    Assessed(usize),
    Tick,
    ConsensusDone,
}

struct InFlight {
    block: Block,
    positions: Vec<usize>,
    vote: VoteRecord,
}

struct Sim<'a, M> {
    cfg: PipelineConfig,
    stream: &'a [Transaction],
    engine: RiskEngine<M>,
    network: &'a mut Network,
    clock: SimClock<Ev>,
    ledger: Ledger,
    incidents: IncidentLog,
    lifecycles: Vec<TxLifecycle>,
    assessments: Vec<Option<RiskAssessment>>,
    events: Vec<Event>,
    votes: Vec<VoteRecord>,
    broadcasts: Vec<Broadcast>,
    failures: Vec<FailedTx>,
    review: Vec<ReviewItem>,
    mempool: VecDeque<usize>,
    in_flight: Option<InFlight>,
    pending: usize,
    round: u64,
}

impl<M: RiskModel> Sim<'_, M> {
    fn log(&mut self, t: u64, kind: EventKind) {
        self.events.push(Event { t, kind });
    }

    fn fail(&mut self, pos: usize, reason: String) {
        self.lifecycles[pos].outcome = Some(Outcome::Failed);
        self.failures.push(FailedTx { tx_id: self.stream[pos].tx_id, reason });
    }

    fn arrival(&mut self, now: u64, pos: usize) {
        let tx = &self.stream[pos];
        self.log(now, EventKind::Submit { tx_id: tx.tx_id });
        let result = if self.engine.online_learning { self.engine.assess_and_learn(tx) } else { self.engine.assess(tx) };
        match result {
            Ok(a) => {
                let lc = &mut self.lifecycles[pos];
                lc.decision = Some(a.decision);
                lc.r = Some(a.r);
                lc.r_ml = Some(a.r_ml);
                lc.r_f = Some(a.r_f);
                self.assessments[pos] = Some(a);
                self.pending += 1;
                self.clock.schedule(now + self.cfg.l_edge + self.cfg.l_ai, Ev::Assessed(pos));
            }
            Err(e) => {
                let tx_id = tx.tx_id;
                self.log(now, EventKind::Error { tx_id, message: e.to_string() });
                self.fail(pos, format!("assessment failed: {e}"));
            }
        }
    }

    fn assessed(&mut self, now: u64, pos: usize) -> Result<()> {
        let a = self.assessments[pos].take().expect("scheduled after assessment");
        let tx = &self.stream[pos];
        self.lifecycles[pos].t_assessed = Some(now);
        self.log(now, EventKind::Assess { tx_id: tx.tx_id, decision: a.decision, r: a.r });
        match a.decision {
            Decision::Reject => {
                let entry = BlockEntry { tx: tx.clone(), risk: a.r, assessed_at: now, monitor: false };
                match self.incidents.append(now, entry, a.r_ml, a.r_f, a.trace) {
                    Ok(seq) => {
                        self.lifecycles[pos].outcome = Some(Outcome::Incident);
                        self.log(now, EventKind::Incident { tx_id: tx.tx_id, seq });
                    }
                    Err(e) => self.fail(pos, format!("incident log: {e}")),
                }
            }
            Decision::Monitor | Decision::Accept => {
                if a.decision == Decision::Monitor {
                    self.review.push(ReviewItem { assessed_at: now, transaction: tx.clone(), assessment: a });
                }
                self.mempool.push_back(pos);
                if self.mempool.len() >= self.cfg.block_size && self.in_flight.is_none() {
                    self.propose(now)?;
                }
            }
        }
        Ok(())
    }

    fn entry(&self, pos: usize) -> BlockEntry {
        let lc = &self.lifecycles[pos];
        BlockEntry {
            tx: self.stream[pos].clone(),
            risk: lc.r.expect("queued transactions are assessed"),
            assessed_at: lc.t_assessed.expect("queued transactions are assessed"),
            monitor: lc.decision == Some(Decision::Monitor),
        }
    }

    fn propose(&mut self, now: u64) -> Result<()> {
        let n = self.mempool.len().min(self.cfg.block_size);
        let positions: Vec<usize> = self.mempool.drain(..n).collect();
        let entries = positions.iter().map(|&p| self.entry(p)).collect();
        let mut block = self.ledger.propose(now, entries)?;
        let rules = ValidationRules {
            expected_prev_hash: self.ledger.tip().hash,
            reject_threshold: self.engine.fusion.eta2,
            max_block_txs: self.cfg.block_size,
        };
        let round = self.round;
        self.round += 1;
        let vote = self.network.run_consensus(&mut block, &rules, round, now);
        let tx_ids = positions.iter().map(|&p| self.stream[p].tx_id).collect();
        self.log(now, EventKind::Propose { block_index: block.index, round, leader: vote.leader, tx_ids });
        for v in &vote.votes {
            let kind = EventKind::Vote {
                block_index: block.index,
                node: v.node,
                approve: v.approve,
                received_at: v.received_at,
                voted_at: v.voted_at,
            };
            self.events.push(Event { t: v.returned_at, kind });
        }
        self.clock.schedule(vote.decided_at, Ev::ConsensusDone);
        self.in_flight = Some(InFlight { block, positions, vote });
        Ok(())
    }

    fn consensus_done(&mut self, now: u64) -> Result<()> {
        let InFlight { block, positions, vote } = self.in_flight.take().expect("consensus event without a block");
        let index = block.index;
        self.log(now, EventKind::Decide { block_index: index, approvals: vote.approvals, threshold: vote.threshold, valid: vote.valid });
        let leader = vote.leader;
        self.votes.push(vote);
        let committed = self.votes.last().is_some_and(|v| v.valid) && {
            let hash: Hash32 = block.hash;
            match self.ledger.append(block) {
                Ok(()) => {
                    self.log(now, EventKind::Commit { block_index: index, hash: hex::encode(hash) });
                    true
                }
                Err(e) => {
                    self.log(now, EventKind::Error { tx_id: 0, message: e.to_string() });
                    false
                }
            }
        };
        if committed {
            let b = self.network.broadcast(index, leader, now);
            self.log(now, EventKind::Broadcast { block_index: index, sender: leader });
            for &(node, t) in &b.receipts {
                self.events.push(Event { t, kind: EventKind::Receive { block_index: index, node } });
            }
            let confirmed = now + b.delay;
            for &p in &positions {
                let lc = &mut self.lifecycles[p];
                lc.t_confirmed = Some(confirmed);
                lc.block_index = Some(index);
                lc.outcome = Some(Outcome::Committed);
            }
            self.broadcasts.push(b);
        } else {
            let mut requeued = Vec::new();
            let mut failed = Vec::new();
            for &p in positions.iter().rev() {
                self.lifecycles[p].retries += 1;
                if self.lifecycles[p].retries > self.cfg.max_retries {
                    failed.push(self.stream[p].tx_id);
                    self.fail(p, format!("block {index} discarded, retries exhausted"));
                } else {
                    requeued.push(self.stream[p].tx_id);
                    self.mempool.push_front(p);
                }
            }
            requeued.reverse();
            failed.reverse();
            self.log(now, EventKind::Discard { block_index: index, requeued, failed });
        }
        if self.mempool.len() >= self.cfg.block_size {
            self.propose(now)?;
        }
        Ok(())
    }

    fn tick(&mut self, now: u64) -> Result<()> {
        if self.in_flight.is_none() && !self.mempool.is_empty() {
            self.propose(now)?;
        }
        if self.pending > 0 || !self.mempool.is_empty() || self.in_flight.is_some() {
            self.clock.schedule(now + self.cfg.block_interval, Ev::Tick);
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        while let Some((now, ev)) = self.clock.pop() {
            match ev {
                Ev::Arrival(pos) => {
                    self.pending -= 1;
                    self.arrival(now, pos);
                }
                Ev::Assessed(pos) => {
                    self.pending -= 1;
                    self.assessed(now, pos)?;
                }
                Ev::Tick => self.tick(now)?,
                Ev::ConsensusDone => self.consensus_done(now)?,
            }
        }
        Ok(())
    }
}

/// Runs `stream` through scoring, consensus and commitment.
///
/// The first `warmup` transactions are flagged in their lifecycles so
/// detection metrics can exclude them; they are processed like any other.
/// Per-transaction failures are recorded, not returned.
pub fn process_stream<M: RiskModel>(
    stream: &[Transaction],
    cfg: &PipelineConfig,
    engine: RiskEngine<M>,
    network: &mut Network,
    warmup: usize,
) -> Result<RunArtifacts<M>> {
    cfg.validate()?;
    if let Some(w) = stream.windows(2).find(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Ordering { tx_id: w[1].tx_id, timestamp: w[1].timestamp, last: w[0].timestamp });
    }
    let ledger = Ledger::new(network.authority().clone(), cfg.block_size)?;
    let lifecycles = stream
        .iter()
        .enumerate()
        .map(|(i, tx)| TxLifecycle {
            tx_id: tx.tx_id,
            label: tx.label,
            warmup: i < warmup,
            decision: None,
            r: None,
            r_ml: None,
            r_f: None,
            t_submitted: tx.timestamp,
            t_assessed: None,
            t_confirmed: None,
            block_index: None,
            l_edge: cfg.l_edge,
            l_ai: cfg.l_ai,
            retries: 0,
            outcome: None,
        })
        .collect();
    let mut clock = SimClock::new();
    for (i, tx) in stream.iter().enumerate() {
        clock.schedule(tx.timestamp, Ev::Arrival(i));
    }
    if let Some(first) = stream.first() {
        clock.schedule((first.timestamp / cfg.block_interval + 1) * cfg.block_interval, Ev::Tick);
    }
    let mut sim = Sim {
        cfg: *cfg,
        stream,
        engine,
        network,
        clock,
        ledger,
        incidents: IncidentLog::new(),
        lifecycles,
        assessments: vec![None; stream.len()],
        events: Vec::with_capacity(stream.len() * 3),
        votes: Vec::new(),
        broadcasts: Vec::new(),
        failures: Vec::new(),
        review: Vec::new(),
        mempool: VecDeque::new(),
        in_flight: None,
        pending: stream.len(),
        round: 0,
    };
    sim.run()?;
    // Stable sort keeps same-time events in processing order.
    sim.events.sort_by_key(|e| e.t);
    Ok(RunArtifacts {
        ledger: sim.ledger,
        incidents: sim.incidents,
        lifecycles: sim.lifecycles,
        events: sim.events,
        votes: sim.votes,
        broadcasts: sim.broadcasts,
        failures: sim.failures,
        review: sim.review,
        engine: sim.engine,
    })
}
