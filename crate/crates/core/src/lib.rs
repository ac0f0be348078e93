//! Dataset toolkit for SCAN-style compositional generalization experiments.
//!
//! Covers the command grammar, corpus generation and splits, primitive
//! augmentations, difficulty scoring, curriculum schedules and dataset
//! analysis. Every randomized operation takes an explicit seed.

pub mod analysis;
pub mod augment;
pub mod corpus;
pub mod curriculum;
pub mod difficulty;
pub mod generate;
pub mod grammar;
pub mod seed;

pub use corpus::{Dataset, Example};
pub use grammar::{Grammar, GrammarConfig};
