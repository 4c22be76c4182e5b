//! Shared numeric utilities: seeded RNG streams, banded linear algebra,
//! small-matrix eigensolves, quasi-random sequences, periodograms, and
//! order statistics.

pub mod linalg;
pub mod rng;
pub mod seq;
pub mod spectrum;
pub mod stats;
