//! Benchmark-only crate; see `benches/optimizers.rs`.
