//! Criterion benchmarks for `mfal-core`; see `benches/`.
