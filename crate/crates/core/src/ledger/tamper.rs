//! Deliberate single-field corruption, used to exercise tamper evidence.
//!
//! Every operation is an involution: applying it twice restores the ledger.

use std::fmt;
use std::str::FromStr;

use super::Ledger;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperField {
    /// Flip a bit of an entry's amount.
    Amount,
    /// Flip a bit of an entry's risk score.
    Risk,
    /// Toggle an entry's fraud label.
    Label,
    /// Flip a bit of an entry's receiver (last byte, ASCII-safe).
    Receiver,
    /// Flip a bit of the block's creation time.
    CreatedAt,
    PrevHash,
    Hash,
    /// Flip a bit of the first signature.
    Signature,
}

impl TamperField {
    pub const ALL: [TamperField; 8] = [
        TamperField::Amount,
        TamperField::Risk,
        TamperField::Label,
        TamperField::Receiver,
        TamperField::CreatedAt,
        TamperField::PrevHash,
        TamperField::Hash,
        TamperField::Signature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TamperField::Amount => "amount",
            TamperField::Risk => "risk",
            TamperField::Label => "label",
            TamperField::Receiver => "receiver",
            TamperField::CreatedAt => "created_at",
            TamperField::PrevHash => "prev_hash",
            TamperField::Hash => "hash",
            TamperField::Signature => "signature",
        }
    }

    fn per_entry(self) -> bool {
        matches!(self, TamperField::Amount | TamperField::Risk | TamperField::Label | TamperField::Receiver)
    }
}

impl fmt::Display for TamperField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TamperField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TamperField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown tamper field `{s}`")))
    }
}

fn flip_f64(v: &mut f64, bit: u32) {
    *v = f64::from_bits(v.to_bits() ^ (1u64 << bit));
}

fn flip_bytes(b: &mut [u8], bit: u32) {
    let bit = bit as usize % (b.len() * 8);
    b[bit / 8] ^= 1 << (bit % 8);
}

/// Flips `bit` of `field` in block `index` (entry `entry` for per-entry
/// fields). Floats use bits 0..52 of the mantissa so values stay finite.
pub fn tamper(ledger: &mut Ledger, index: u64, entry: usize, field: TamperField, bit: u32) -> Result<()> {
    let pos = ledger
        .blocks()
        .iter()
        .position(|b| b.index == index)
        .ok_or_else(|| Error::config(format!("no block with index {index}")))?;
    let block = &mut ledger.blocks_mut()[pos];
    if field.per_entry() && entry >= block.entries.len() {
        return Err(Error::config(format!("block {index} has {} entries, no entry {entry}", block.entries.len())));
    }
    let mantissa_bit = bit % 52;
    match field {
        TamperField::Amount => flip_f64(&mut block.entries[entry].tx.amount, mantissa_bit),
        TamperField::Risk => flip_f64(&mut block.entries[entry].risk, mantissa_bit),
        TamperField::Label => {
            let label = &mut block.entries[entry].tx.label;
            *label = match *label {
                Some(b) => Some(!b),
                None => return Err(Error::config("entry has no label to toggle")),
            };
        }
        TamperField::Receiver => {
            let mut bytes = std::mem::take(&mut block.entries[entry].tx.receiver.0).into_bytes();
            let last = bytes.last_mut().ok_or_else(|| Error::config("empty receiver"))?;
            *last ^= 1 << (bit % 7);
            block.entries[entry].tx.receiver.0 =
                String::from_utf8(bytes).map_err(|_| Error::config("receiver is not ASCII at its last byte"))?;
        }
        TamperField::CreatedAt => block.created_at ^= 1u64 << (bit % 64),
        TamperField::PrevHash => flip_bytes(&mut block.prev_hash, bit),
        TamperField::Hash => flip_bytes(&mut block.hash, bit),
        TamperField::Signature => {
            let sig = block
                .signatures
                .first_mut()
                .ok_or_else(|| Error::config(format!("block {index} carries no signatures")))?;
            flip_bytes(&mut sig.signature, bit);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::entry;
    use super::super::Authority;
    use super::*;

    fn chain() -> Ledger {
        let mut l = Ledger::new(Authority::derive(5, 3, 3).unwrap(), 5).unwrap();
        for k in 1..=10u64 {
            let b = l.seal(k * 100, vec![entry(k), entry(k + 100)], &[0, 2, 4]).unwrap();
            l.append(b).unwrap();
        }
        l
    }

    #[test]
    fn every_field_is_detected_at_its_block() {
        for field in TamperField::ALL {
            let mut l = chain();
            tamper(&mut l, 6, 1, field, 5).unwrap();
            let fault = l.verify_chain().unwrap_err();
            assert_eq!(fault.index, 6, "{field}: {fault}");
        }
    }

    #[test]
    fn tampering_twice_restores() {
        for field in TamperField::ALL {
            let mut l = chain();
            let orig = l.clone();
            tamper(&mut l, 3, 0, field, 17).unwrap();
            assert_ne!(l, orig);
            tamper(&mut l, 3, 0, field, 17).unwrap();
            assert_eq!(l, orig);
        }
    }

    #[test]
    fn parse_names() {
        for field in TamperField::ALL {
            assert_eq!(field.name().parse::<TamperField>().unwrap(), field);
        }
        assert!("nonce".parse::<TamperField>().is_err());
    }

    #[test]
    fn bad_targets() {
        let mut l = chain();
        assert!(tamper(&mut l, 99, 0, TamperField::Amount, 0).is_err());
        assert!(tamper(&mut l, 2, 9, TamperField::Amount, 0).is_err());
        assert!(tamper(&mut l, 0, 0, TamperField::Signature, 0).is_err());
    }
}
