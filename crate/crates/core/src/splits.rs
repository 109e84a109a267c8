//! Seed-split convention shared by the harness tools.
//!
//! Episode generation is deterministic in `(family, seed)`, so disjoint seed
//! ranges keep evaluation data, annotation data, and demonstration data from
//! leaking into each other. The environment itself accepts any seed; the
//! ranges are enforced by the tools that care (demo capture, dataset builds).

use std::ops::Range;

/// Seeds used for evaluation episodes.
pub const TEST_SEEDS: Range<u64> = 0..1000;
/// Seeds used when collecting screenshot/annotation data.
pub const ANNOTATION_SEEDS: Range<u64> = 1000..3000;
/// Seeds used when recording demonstrations.
pub const DEMO_SEEDS: Range<u64> = 3000..4000;
