//! Simulated proof-of-authority validator network.
//!
//! A round-robin leader sends each candidate block to every validator. Each
//! validator receives it after a link delay, validates it for a sampled
//! validation time and returns its vote after another link delay. The block
//! is accepted when at least `threshold` validators approve; every approving
//! validator signs it. Committed blocks are then broadcast to the other
//! nodes, and the propagation delay is the latest receive time minus the
//! broadcast time. All times are integer virtual milliseconds.

pub mod clock;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use clock::SimClock;

use crate::error::{Error, Result};
use crate::ledger::{Authority, Block, Hash32, Validator};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    #[default]
    Honest,
    AlwaysReject,
    /// Approves or rejects with equal probability.
    RandomVote,
}

/// Inclusive range of integer virtual milliseconds, sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRange {
    pub min: u64,
    pub max: u64,
}

impl LatencyRange {
    pub fn new(min: u64, max: u64) -> Result<Self> {
        let r = LatencyRange { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn constant(ms: u64) -> Self {
        LatencyRange { min: ms, max: ms }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::config(format!("latency range [{}, {}] must satisfy 0 < min <= max", self.min, self.max)));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub nodes: usize,
    /// Approvals needed to accept a block.
    pub threshold: usize,
    pub link_latency: LatencyRange,
    pub validation_latency: LatencyRange,
    /// Fault mode per node id; missing entries are honest.
    pub faults: Vec<FaultMode>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            nodes: 5,
            threshold: 3,
            link_latency: LatencyRange { min: 10, max: 50 },
            validation_latency: LatencyRange { min: 10, max: 30 },
            faults: Vec::new(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::config("network needs at least one node"));
        }
        if self.threshold == 0 || self.threshold > self.nodes {
            return Err(Error::config(format!(
                "threshold {} must be between 1 and the node count {}",
                self.threshold, self.nodes
            )));
        }
        if self.faults.len() > self.nodes {
            return Err(Error::config(format!("{} fault modes for {} nodes", self.faults.len(), self.nodes)));
        }
        self.link_latency.validate()?;
        self.validation_latency.validate()
    }

    pub fn fault(&self, node: usize) -> FaultMode {
        self.faults.get(node).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorNode {
    pub key: Validator,
    pub fault: FaultMode,
    pub validation_latency: LatencyRange,
}

impl ValidatorNode {
    pub fn id(&self) -> u32 {
        self.key.id
    }
}

/// What an honest validator checks a candidate block against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRules {
    pub expected_prev_hash: Hash32,
    /// Every entry's recorded risk must lie below this.
    pub reject_threshold: f64,
    pub max_block_txs: usize,
}

/// Checks an honest validator applies: hash, link, recorded risks, size.
pub fn honest_verdict(block: &Block, rules: &ValidationRules) -> bool {
    let hash_ok = block.compute_hash().is_ok_and(|h| h == block.hash);
    hash_ok
        && block.prev_hash == rules.expected_prev_hash
        && (1..=rules.max_block_txs).contains(&block.entries.len())
        && block.entries.iter().all(|e| e.risk < rules.reject_threshold)
}

/// Block accepted iff at least `threshold` votes approve.
pub fn tally(votes: &[bool], threshold: usize) -> bool {
    votes.iter().filter(|v| **v).count() >= threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeVote {
    pub node: u32,
    pub approve: bool,
    pub received_at: u64,
    pub voted_at: u64,
    /// When the vote reaches the leader.
    pub returned_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub block_index: u64,
    pub round: u64,
    pub leader: u32,
    pub proposed_at: u64,
    pub votes: Vec<NodeVote>,
    pub approvals: usize,
    pub threshold: usize,
    pub valid: bool,
    /// Time the last vote reaches the leader.
    pub decided_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Broadcast {
    pub block_index: u64,
    pub sent_at: u64,
    /// (node, receive time) for every node other than the sender.
    pub receipts: Vec<(u32, u64)>,
    /// Latest receive time minus send time; 0 for a single-node network.
    pub delay: u64,
}

pub struct Network {
    nodes: Vec<ValidatorNode>,
    authority: Authority,
    link_latency: LatencyRange,
    threshold: usize,
    latency_rng: SimRng,
    fault_rng: SimRng,
}

impl Network {
    pub fn new(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let authority = Authority::derive(cfg.nodes, cfg.threshold, seed)?;
        let nodes = authority
            .validators
            .iter()
            .enumerate()
            .map(|(i, key)| ValidatorNode { key: key.clone(), fault: cfg.fault(i), validation_latency: cfg.validation_latency })
            .collect();
        Ok(Network {
            nodes,
            authority,
            link_latency: cfg.link_latency,
            threshold: cfg.threshold,
            latency_rng: rng::stream(seed, rng::STREAM_NETWORK),
            fault_rng: rng::stream(seed, rng::STREAM_FAULTS),
        })
    }

    pub fn nodes(&self) -> &[ValidatorNode] {
        &self.nodes
    }

    pub fn authority(&self) -> &Authority {
        &self.authority
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn select_leader(&self, round: u64) -> &ValidatorNode {
        &self.nodes[(round % self.nodes.len() as u64) as usize]
    }

    fn vote(&mut self, node: usize, block: &Block, rules: &ValidationRules) -> bool {
        match self.nodes[node].fault {
            FaultMode::Honest => honest_verdict(block, rules),
            FaultMode::AlwaysReject => false,
            FaultMode::RandomVote => self.fault_rng.random_bool(0.5),
        }
    }

    /// Collects every node's vote on `block`, proposed at `now` in `round`,
    /// and attaches the approving nodes' signatures to it.
    pub fn run_consensus(&mut self, block: &mut Block, rules: &ValidationRules, round: u64, now: u64) -> VoteRecord {
        let leader = self.select_leader(round).id();
        let mut votes = Vec::with_capacity(self.nodes.len());
        for i in 0..self.nodes.len() {
            let local = self.nodes[i].id() == leader;
            let out = if local { 0 } else { self.link_latency.sample(&mut self.latency_rng) };
            let validation = self.nodes[i].validation_latency.sample(&mut self.latency_rng);
            let back = if local { 0 } else { self.link_latency.sample(&mut self.latency_rng) };
            let approve = self.vote(i, block, rules);
            let received_at = now + out;
            let voted_at = received_at + validation;
            votes.push(NodeVote { node: self.nodes[i].id(), approve, received_at, voted_at, returned_at: voted_at + back });
        }
        let approvals = votes.iter().filter(|v| v.approve).count();
        let valid = approvals >= self.threshold;
        block.signatures = votes
            .iter()
            .filter(|v| v.approve)
            .map(|v| self.nodes.iter().find(|n| n.id() == v.node).expect("voter is a node").key.sign(&block.hash))
            .collect();
        VoteRecord {
            block_index: block.index,
            round,
            leader,
            proposed_at: now,
            decided_at: votes.iter().map(|v| v.returned_at).max().unwrap_or(now),
            votes,
            approvals,
            threshold: self.threshold,
            valid,
        }
    }

    /// Sends a committed block from `sender` to every other node.
    pub fn broadcast(&mut self, block_index: u64, sender: u32, now: u64) -> Broadcast {
        let receipts: Vec<(u32, u64)> = self
            .nodes
            .iter()
            .filter(|n| n.id() != sender)
            .map(|n| (n.id(), now + self.link_latency.sample(&mut self.latency_rng)))
            .collect();
        let delay = receipts.iter().map(|(_, t)| t - now).max().unwrap_or(0);
        Broadcast { block_index, sent_at: now, receipts, delay }
    }
}
