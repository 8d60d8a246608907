//! Criterion benchmarks for the core pipeline live in `benches/`; run them with `cargo bench -p bolab-bench`.
