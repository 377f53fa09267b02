//! Problem files, derivation traces and proofs.

mod parse;
mod proof;
mod trace;

pub use parse::{parse_clause, parse_problem, InputClause, ParseError, Problem, Role};
pub use proof::{check_proof, extract_proof, ProofCheckError, ProofObject};
pub use trace::{read_trace, write_trace, DerivationTrace, TraceError, TraceRecord, TRACE_HEADER};
