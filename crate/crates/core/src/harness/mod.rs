//! Corpus generation, benchmarking, grid search and the training loop.

pub mod bench;
pub mod corpus;
pub mod experiment;
pub mod grid;
pub mod learning;
pub mod training;
