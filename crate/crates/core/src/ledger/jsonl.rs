//! JSON Lines export and import.
//!
//! One block per line, genesis first. Hashes and signatures are lowercase
//! hex. The genesis line also carries the validator committee and block
//! size limit so a file can be verified on its own; those fields are not
//! part of any block hash.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{hex32, Authority, Block, BlockEntry, Hash32, Ledger, Signature};
use crate::error::{Error, Result};

pub const LEDGER_SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Line {
    schema_version: u32,
    index: u64,
    created_at: u64,
    #[serde(with = "hex32")]
    prev_hash: Hash32,
    #[serde(with = "hex32")]
    hash: Hash32,
    entries: Vec<BlockEntry>,
    signatures: Vec<Signature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    authority: Option<Authority>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_block_txs: Option<usize>,
}

pub fn write_jsonl(ledger: &Ledger, mut out: impl Write) -> Result<()> {
    for (i, b) in ledger.blocks().iter().enumerate() {
        let genesis = i == 0;
        let line = Line {
            schema_version: LEDGER_SCHEMA,
            index: b.index,
            created_at: b.created_at,
            prev_hash: b.prev_hash,
            hash: b.hash,
            entries: b.entries.clone(),
            signatures: b.signatures.clone(),
            authority: genesis.then(|| ledger.authority().clone()),
            max_block_txs: genesis.then_some(ledger.max_block_txs()),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a ledger file. Only the format is checked here; call
/// [`Ledger::verify_chain`] for integrity.
pub fn read_jsonl(input: impl BufRead) -> Result<Ledger> {
    let mut blocks = Vec::new();
    let mut header = None;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("ledger line {}", n + 1);
        let parsed: Line =
            serde_json::from_str(&line).map_err(|e| Error::Parse { location: location.clone(), message: e.to_string() })?;
        if parsed.schema_version != LEDGER_SCHEMA {
            return Err(Error::Schema(format!(
                "{location}: schema version {} unsupported (expected {LEDGER_SCHEMA})",
                parsed.schema_version
            )));
        }
        if blocks.is_empty() {
            match (parsed.authority, parsed.max_block_txs) {
                (Some(a), Some(m)) => header = Some((a, m)),
                _ => return Err(Error::Schema(format!("{location}: first line must carry authority and max_block_txs"))),
            }
        }
        blocks.push(Block {
            index: parsed.index,
            created_at: parsed.created_at,
            prev_hash: parsed.prev_hash,
            hash: parsed.hash,
            entries: parsed.entries,
            signatures: parsed.signatures,
        });
    }
    let (authority, max) = header.ok_or_else(|| Error::Schema("empty ledger file".into()))?;
    let authority = Authority::new(authority.validators, authority.threshold)?;
    Ledger::from_parts(blocks, authority, max)
}
