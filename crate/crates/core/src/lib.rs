//! Transaction fraud screening with a neuro-fuzzy risk engine and a
//! simulated proof-of-authority ledger.
//!
//! A stream of transactions ([`tx`], generated by [`datagen`] or loaded from
//! CSV) is scored by [`risk`]: a logistic classifier and a fuzzy rule base
//! are fused into one score and banded into Accept, Monitor or Reject.
//! Rejected transactions go to a hash-chained incident log. The rest are
//! batched into blocks that a validator committee votes on ([`consensus`])
//! before they are appended to the [`ledger`]. [`pipeline`] drives all of
//! this on a virtual clock, [`metrics`] summarizes detection and timing,
//! and [`run`] and [`suite`] wrap single runs and seed grids with their
//! configuration and artifacts.
//!
//! Every run is a deterministic function of its seed and configuration.

pub mod consensus;
pub mod datagen;
pub mod error;
pub mod ledger;
pub mod metrics;
pub mod pipeline;
pub mod risk;
pub mod rng;
pub mod run;
pub mod suite;
pub mod tx;

pub use error::{Error, Result};
