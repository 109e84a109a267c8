//! Benchmark-only crate; the targets live in `benches/core_paths.rs`.
//! Run with `cargo bench -p gui-agent-bench`.
