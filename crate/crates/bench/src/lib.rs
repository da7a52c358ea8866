//! Criterion benchmarks for rcshare live in `benches/`.
