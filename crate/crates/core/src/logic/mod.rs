//! Terms, clauses, unification and the resolution calculus.

mod clause;
mod inference;
mod simplify;
mod subst;
mod term;

pub use clause::{dedup_literals, literals_text, rename_from, Clause, ClauseId, Literal, Rule};
pub use inference::{factor, resolve, resolvents, UNASSIGNED};
pub use simplify::{is_tautology, subsumes, symbol_weight, unit_subsumes};
pub use subst::{match_into, unify, unify_all, Substitution};
pub use term::{Symbol, Term, Var};
