//! Hash-chained, append-only block ledger with simulated validator
//! signatures.
//!
//! Every block commits to its predecessor through `prev_hash`, and its own
//! hash covers the canonical encoding of its content followed by
//! `prev_hash`. A block is valid when its recomputed hash matches, its link
//! matches the predecessor, every attached signature verifies, and at least
//! `threshold` distinct registered validators signed.

pub mod codec;
pub mod jsonl;
pub mod tamper;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tx::Transaction;

pub use codec::{block_hash, serialize_block, sha256, sign};
pub use jsonl::{read_jsonl, write_jsonl, LEDGER_SCHEMA};
pub use tamper::{tamper, TamperField};

pub type Hash32 = [u8; 32];

pub const ZERO_HASH: Hash32 = [0; 32];

pub(crate) mod hex32 {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(h))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(|e| D::Error::custom(format!("bad 32-byte hex `{s}`: {e}")))?;
        Ok(out)
    }
}

/// A committed transaction with the risk score and time of its assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub tx: Transaction,
    pub risk: f64,
    pub assessed_at: u64,
    /// Committed from the monitor band and queued for review.
    pub monitor: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub validator: u32,
    #[serde(with = "hex32")]
    pub signature: Hash32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub created_at: u64,
    #[serde(with = "hex32")]
    pub prev_hash: Hash32,
    #[serde(with = "hex32")]
    pub hash: Hash32,
    pub entries: Vec<BlockEntry>,
    pub signatures: Vec<Signature>,
}

impl Block {
    pub fn genesis() -> Self {
        let hash = block_hash(0, 0, &ZERO_HASH, &[]).expect("empty genesis encodes");
        Block { index: 0, created_at: 0, prev_hash: ZERO_HASH, hash, entries: Vec::new(), signatures: Vec::new() }
    }

    /// Builds an unsigned block with its hash filled in.
    pub fn build(index: u64, created_at: u64, prev_hash: Hash32, entries: Vec<BlockEntry>) -> Result<Self> {
        let hash = block_hash(index, created_at, &prev_hash, &entries)?;
        Ok(Block { index, created_at, prev_hash, hash, entries, signatures: Vec::new() })
    }

    pub fn compute_hash(&self) -> Result<Hash32> {
        block_hash(self.index, self.created_at, &self.prev_hash, &self.entries)
    }

    pub fn serialize(&self) -> Result<Vec<u8>> {
        serialize_block(self.index, self.created_at, &self.prev_hash, &self.entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validator {
    pub id: u32,
    #[serde(with = "hex32")]
    pub secret: Hash32,
}

impl Validator {
    pub fn sign(&self, hash: &Hash32) -> Signature {
        Signature { validator: self.id, signature: sign(&self.secret, hash) }
    }
}

/// The registered validator committee and its approval threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Authority {
    pub validators: Vec<Validator>,
    pub threshold: usize,
}

impl Authority {
    pub fn new(validators: Vec<Validator>, threshold: usize) -> Result<Self> {
        let ids: BTreeSet<u32> = validators.iter().map(|v| v.id).collect();
        if ids.len() != validators.len() {
            return Err(Error::config("duplicate validator id"));
        }
        if threshold == 0 || threshold > validators.len() {
            return Err(Error::config(format!(
                "threshold {threshold} must be between 1 and the committee size {}",
                validators.len()
            )));
        }
        Ok(Authority { validators, threshold })
    }

    /// Committee of `n` validators with ids `0..n` and secrets derived from `seed`.
    pub fn derive(n: usize, threshold: usize, seed: u64) -> Result<Self> {
        let validators = (0..n as u32)
            .map(|id| Validator { id, secret: sha256(&[b"anfb-validator", &seed.to_be_bytes(), &id.to_be_bytes()]) })
            .collect();
        Authority::new(validators, threshold)
    }

    pub fn validator(&self, id: u32) -> Option<&Validator> {
        self.validators.iter().find(|v| v.id == id)
    }

    pub fn verify_signature(&self, hash: &Hash32, sig: &Signature) -> bool {
        self.validator(sig.validator).is_some_and(|v| sign(&v.secret, hash) == sig.signature)
    }

    /// Checks the signature set of a block whose hash is `hash`.
    pub fn check_signatures(&self, index: u64, hash: &Hash32, sigs: &[Signature]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in sigs {
            if !self.verify_signature(hash, s) {
                return Err(Error::Authorization { index, reason: format!("invalid signature from validator {}", s.validator) });
            }
            if !seen.insert(s.validator) {
                return Err(Error::Authorization { index, reason: format!("duplicate signature from validator {}", s.validator) });
            }
        }
        if seen.len() < self.threshold {
            return Err(Error::Authorization {
                index,
                reason: format!("{} signatures, {} required", seen.len(), self.threshold),
            });
        }
        Ok(())
    }
}

/// Why verification stopped at a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FaultReason {
    Index { expected: u64, found: u64 },
    Link,
    HashMismatch,
    Encoding { message: String },
    Genesis,
    Size { count: usize },
    Signature { message: String },
}

impl fmt::Display for FaultReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultReason::Index { expected, found } => write!(f, "index {found}, expected {expected}"),
            FaultReason::Link => f.write_str("prev_hash does not match the previous block hash"),
            FaultReason::HashMismatch => f.write_str("stored hash does not match recomputed hash"),
            FaultReason::Encoding { message } => write!(f, "cannot encode block: {message}"),
            FaultReason::Genesis => f.write_str("malformed genesis block"),
            FaultReason::Size { count } => write!(f, "block holds {count} transactions"),
            FaultReason::Signature { message } => f.write_str(message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainFault {
    pub index: u64,
    pub reason: FaultReason,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {}: {}", self.index, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    blocks: Vec<Block>,
    authority: Authority,
    max_block_txs: usize,
}

impl Ledger {
    pub fn new(authority: Authority, max_block_txs: usize) -> Result<Self> {
        if max_block_txs == 0 {
            return Err(Error::config("max block size must be at least 1"));
        }
        Ok(Ledger { blocks: vec![Block::genesis()], authority, max_block_txs })
    }

    /// Reassembles a ledger from stored blocks without checking them; run
    /// [`Self::verify_chain`] to validate.
    pub fn from_parts(blocks: Vec<Block>, authority: Authority, max_block_txs: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Schema("ledger has no genesis block".into()));
        }
        Ok(Ledger { blocks, authority, max_block_txs })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn authority(&self) -> &Authority {
        &self.authority
    }

    pub fn max_block_txs(&self) -> usize {
        self.max_block_txs
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("ledger always holds genesis")
    }

    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(|b| b.entries.len()).sum()
    }

    /// Unsigned candidate block extending the current tip.
    pub fn propose(&self, created_at: u64, entries: Vec<BlockEntry>) -> Result<Block> {
        let tip = self.tip();
        Block::build(tip.index + 1, created_at, tip.hash, entries)
    }

    /// Candidate block signed by the given validators.
    pub fn seal(&self, created_at: u64, entries: Vec<BlockEntry>, signers: &[u32]) -> Result<Block> {
        let mut block = self.propose(created_at, entries)?;
        for id in signers {
            let v = self
                .authority
                .validator(*id)
                .ok_or_else(|| Error::config(format!("unknown validator {id}")))?;
            block.signatures.push(v.sign(&block.hash));
        }
        Ok(block)
    }

    fn check_block(&self, prev: &Block, block: &Block) -> std::result::Result<(), FaultReason> {
        if block.index != prev.index + 1 {
            return Err(FaultReason::Index { expected: prev.index + 1, found: block.index });
        }
        let recomputed = block.compute_hash().map_err(|e| FaultReason::Encoding { message: e.to_string() })?;
        if recomputed != block.hash {
            return Err(FaultReason::HashMismatch);
        }
        if block.prev_hash != prev.hash {
            return Err(FaultReason::Link);
        }
        if block.entries.is_empty() || block.entries.len() > self.max_block_txs {
            return Err(FaultReason::Size { count: block.entries.len() });
        }
        self.authority
            .check_signatures(block.index, &block.hash, &block.signatures)
            .map_err(|e| FaultReason::Signature { message: e.to_string() })
    }

    /// Appends a block after checking its link, hash, size and signatures.
    /// On error the ledger is unchanged.
    pub fn append(&mut self, block: Block) -> Result<()> {
        match self.check_block(self.tip(), &block) {
            Ok(()) => {
                self.blocks.push(block);
                Ok(())
            }
            Err(FaultReason::Signature { message }) => Err(Error::Authorization { index: block.index, reason: message }),
            Err(reason) => Err(Error::Chain { index: block.index, reason: reason.to_string() }),
        }
    }

    /// Recomputes every hash, link and signature set; returns the first
    /// failing block.
    pub fn verify_chain(&self) -> std::result::Result<(), ChainFault> {
        let genesis = &self.blocks[0];
        let expected = Block::genesis();
        if genesis.index != 0
            || genesis.prev_hash != ZERO_HASH
            || !genesis.entries.is_empty()
            || genesis.created_at != 0
            || !genesis.signatures.is_empty()
            || genesis.hash != expected.hash
        {
            return Err(ChainFault { index: genesis.index, reason: FaultReason::Genesis });
        }
        for pair in self.blocks.windows(2) {
            if let Err(reason) = self.check_block(&pair[0], &pair[1]) {
                // Report the position in the chain, not a possibly corrupted index field.
                let position = pair[0].index + 1;
                return Err(ChainFault { index: position, reason });
            }
        }
        Ok(())
    }
}
