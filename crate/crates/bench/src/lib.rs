//! Criterion benchmarks for the scheduling and training kernels; see
//! `benches/kernels.rs`.
