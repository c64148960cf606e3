//! Criterion benchmarks of the qnglab kernels live in `benches/`.
