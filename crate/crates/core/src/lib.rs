//! A given-clause resolution prover whose clause selection is guided by
//! gradient-boosted tree models.
//!
//! The crate is organised bottom-up:
//!
//! * [`logic`]: terms, clauses, unification, resolution and factoring.
//! * [`problem`]: the CNF problem syntax, derivation traces and the proof
//!   checker.
//! * [`features`]: hashed syntax-tree walk features for clauses and parent
//!   pairs.
//! * [`gbdt`]: boosted regression trees with a logistic link.
//! * [`server`]: a batching model server speaking line-delimited JSON, and
//!   its client.
//! * [`prover`]: the saturation loop with coop selection, 2-phase
//!   evaluation and parental guidance with a freezer.
//! * [`traindata`]: labelled training sets from derivation traces.
//! * [`harness`]: problem generators, benchmarks, grid search and the
//!   prove/learn loop.

pub mod features;
pub mod gbdt;
pub mod harness;
pub mod logic;
pub mod problem;
pub mod prover;
pub mod server;
pub mod traindata;

mod error;
pub use error::Error;
