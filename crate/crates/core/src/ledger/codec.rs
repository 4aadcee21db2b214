//! Canonical block encoding.
//!
//! Layout, all integers big-endian and fixed width:
//!
//! ```text
//! block  := index:u64 created_at:u64 prev_hash:[u8;32] count:u32 entry*
//! entry  := tx_id:u64 sender:str receiver:str amount:f64 timestamp:u64
//!           region:u16 coords device:u32 behavior label:u8
//!           risk:f64 assessed_at:u64 monitor:u8
//! coords := 0x00 | 0x01 lat:f64 lon:f64
//! behavior := tx_rate:f64 amount_zscore:f64 device_consistency:f64
//!             geo_jump:u8 dormancy_gap:f64
//! str    := len:u32 utf8-bytes
//! label  := 0x00 legit | 0x01 fraud | 0xFF unknown
//! ```
//!
//! Floats are written as their IEEE-754 bit patterns and must be finite.

use sha2::{Digest, Sha256};

use super::{BlockEntry, Hash32};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn f64(&mut self, field: &'static str, v: f64) -> Result<&mut Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite(field));
        }
        self.buf.extend_from_slice(&v.to_bits().to_be_bytes());
        Ok(self)
    }

    pub fn str(&mut self, s: &str) -> Result<&mut Self> {
        let len = u32::try_from(s.len()).map_err(|_| Error::config("string field longer than u32::MAX bytes"))?;
        self.u32(len);
        self.buf.extend_from_slice(s.as_bytes());
        Ok(self)
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub fn encode_entry(enc: &mut Encoder, e: &BlockEntry) -> Result<()> {
    let tx = &e.tx;
    enc.u64(tx.tx_id);
    enc.str(tx.sender.as_str())?;
    enc.str(tx.receiver.as_str())?;
    enc.f64("amount", tx.amount)?;
    enc.u64(tx.timestamp);
    enc.u16(tx.geo.region);
    match tx.geo.coords {
        None => {
            enc.u8(0);
        }
        Some(c) => {
            enc.u8(1).f64("lat", c.lat)?.f64("lon", c.lon)?;
        }
    }
    enc.u32(tx.device);
    let b = &tx.behavior;
    enc.f64("tx_rate", b.tx_rate)?
        .f64("amount_zscore", b.amount_zscore)?
        .f64("device_consistency", b.device_consistency)?
        .u8(b.geo_jump as u8)
        .f64("dormancy_gap", b.dormancy_gap)?;
    enc.u8(match tx.label {
        Some(false) => 0x00,
        Some(true) => 0x01,
        None => 0xFF,
    });
    enc.f64("risk", e.risk)?.u64(e.assessed_at).u8(e.monitor as u8);
    Ok(())
}

/// Canonical bytes of a block's content (everything except hash and signatures).
pub fn serialize_block(index: u64, created_at: u64, prev_hash: &Hash32, entries: &[BlockEntry]) -> Result<Vec<u8>> {
    let count = u32::try_from(entries.len()).map_err(|_| Error::config("too many transactions in block"))?;
    let mut enc = Encoder::new();
    enc.u64(index).u64(created_at).bytes(prev_hash).u32(count);
    for e in entries {
        encode_entry(&mut enc, e)?;
    }
    Ok(enc.finish())
}

pub fn sha256(parts: &[&[u8]]) -> Hash32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// `SHA-256(serialize(block) || prev_hash)`.
pub fn block_hash(index: u64, created_at: u64, prev_hash: &Hash32, entries: &[BlockEntry]) -> Result<Hash32> {
    let bytes = serialize_block(index, created_at, prev_hash, entries)?;
    Ok(sha256(&[&bytes, prev_hash]))
}

/// Simulated signature: `SHA-256(secret || hash)`.
pub fn sign(secret: &Hash32, hash: &Hash32) -> Hash32 {
    sha256(&[secret, hash])
}
