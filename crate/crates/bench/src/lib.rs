//! Criterion benchmarks for the exact arithmetic, tower and stability-time
//! code paths. Run with `cargo bench -p ergodic-towers-bench`.
