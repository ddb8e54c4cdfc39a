//! Criterion benchmarks for the wavefield pipeline live in `benches/`.
