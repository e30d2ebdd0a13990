//! Criterion benchmarks for the physgp crate; see `benches/gp.rs`.
