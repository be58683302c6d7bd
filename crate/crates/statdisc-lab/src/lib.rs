//! Experiment harness for the stationary-disc library: seeded quadric
//! generators, the stationary-minimality search, and the conjecture
//! explorer with its report formats.

pub mod explorer;
pub mod generator;
pub mod search;
