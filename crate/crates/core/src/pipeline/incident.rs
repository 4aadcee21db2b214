//! Hash-chained log of rejected transactions.
//!
//! Rejected transactions never reach the ledger, so they are recorded here
//! instead, chained with the same encoding and hash rule as ledger blocks:
//! each record's hash is `SHA-256(encode(record) || prev_hash)`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::codec::{encode_entry, sha256, Encoder};
use crate::ledger::{hex32, BlockEntry, Hash32, ZERO_HASH};
use crate::risk::{Decision, RuleTrace};

pub const INCIDENT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub seq: u64,
    pub recorded_at: u64,
    #[serde(with = "hex32")]
    pub prev_hash: Hash32,
    #[serde(with = "hex32")]
    pub hash: Hash32,
    /// The transaction with its fused risk and assessment time.
    pub entry: BlockEntry,
    pub r_ml: f64,
    pub r_f: f64,
    pub decision: Decision,
    /// Explanation only; not covered by the hash.
    #[serde(default)]
    pub trace: Vec<RuleTrace>,
}

fn record_hash(seq: u64, recorded_at: u64, prev_hash: &Hash32, entry: &BlockEntry, r_ml: f64, r_f: f64) -> Result<Hash32> {
    let mut enc = Encoder::new();
    enc.u64(seq).u64(recorded_at).bytes(prev_hash);
    encode_entry(&mut enc, entry)?;
    enc.f64("r_ml", r_ml)?.f64("r_f", r_f)?;
    Ok(sha256(&[&enc.finish(), prev_hash]))
}

impl IncidentRecord {
    pub fn compute_hash(&self) -> Result<Hash32> {
        record_hash(self.seq, self.recorded_at, &self.prev_hash, &self.entry, self.r_ml, self.r_f)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IncidentLog {
    records: Vec<IncidentRecord>,
}

impl IncidentLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[IncidentRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [IncidentRecord] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.records.last().map_or(ZERO_HASH, |r| r.hash)
    }

    pub fn append(
        &mut self,
        recorded_at: u64,
        entry: BlockEntry,
        r_ml: f64,
        r_f: f64,
        trace: Vec<RuleTrace>,
    ) -> Result<u64> {
        let seq = self.records.len() as u64;
        let prev_hash = self.tip_hash();
        let hash = record_hash(seq, recorded_at, &prev_hash, &entry, r_ml, r_f)?;
        self.records.push(IncidentRecord {
            seq,
            recorded_at,
            prev_hash,
            hash,
            entry,
            r_ml,
            r_f,
            decision: Decision::Reject,
            trace,
        });
        Ok(seq)
    }

    /// Returns the position of the first record whose sequence number, hash
    /// or link fails.
    pub fn verify(&self) -> std::result::Result<(), u64> {
        let mut prev = ZERO_HASH;
        for (i, r) in self.records.iter().enumerate() {
            let ok = r.seq == i as u64 && r.prev_hash == prev && r.compute_hash().is_ok_and(|h| h == r.hash);
            if !ok {
                return Err(i as u64);
            }
            prev = r.hash;
        }
        Ok(())
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            schema_version: u32,
            #[serde(flatten)]
            record: &'a IncidentRecord,
        }
        for record in &self.records {
            serde_json::to_writer(&mut out, &Line { schema_version: INCIDENT_SCHEMA, record })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            schema_version: u32,
            seq: u64,
            recorded_at: u64,
            #[serde(with = "hex32")]
            prev_hash: Hash32,
            #[serde(with = "hex32")]
            hash: Hash32,
            entry: BlockEntry,
            r_ml: f64,
            r_f: f64,
            decision: Decision,
            #[serde(default)]
            trace: Vec<RuleTrace>,
        }
        let mut records = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let location = format!("incident line {}", n + 1);
            let l: Line = serde_json::from_str(&line).map_err(|e| Error::Parse { location: location.clone(), message: e.to_string() })?;
            if l.schema_version != INCIDENT_SCHEMA {
                return Err(Error::Schema(format!("{location}: schema version {} unsupported", l.schema_version)));
            }
            records.push(IncidentRecord {
                seq: l.seq,
                recorded_at: l.recorded_at,
                prev_hash: l.prev_hash,
                hash: l.hash,
                entry: l.entry,
                r_ml: l.r_ml,
                r_f: l.r_f,
                decision: l.decision,
                trace: l.trace,
            });
        }
        Ok(IncidentLog { records })
    }
}
