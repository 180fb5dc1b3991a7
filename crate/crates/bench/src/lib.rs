//! Criterion benchmarks for the numeric kernels of `lacuna-core`; see `benches/`.
