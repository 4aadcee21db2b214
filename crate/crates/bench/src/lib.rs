//! Criterion benchmarks for the risk engine, ledger and pipeline live in
//! `benches/`. This crate has no library surface of its own.
