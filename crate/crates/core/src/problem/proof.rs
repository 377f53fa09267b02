//! Proof extraction and an independent proof checker.
//!
//! The checker re-derives every inference step from the recorded parents
//! with its own resolvent and factor construction and accepts a step when
//! the recorded clause is a variant of a re-derived one.

use std::collections::HashMap;

use thiserror::Error;

use super::parse::Problem;
use super::trace::{DerivationTrace, TraceRecord};
use crate::logic::{subsumes, unify, Clause, ClauseId, Literal, Rule, Term};

/// The part of a trace consisting of the empty clause and its ancestors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofObject {
    pub steps: Vec<TraceRecord>,
}

impl ProofObject {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn ids(&self) -> Vec<ClauseId> {
        self.steps.iter().map(|s| s.id).collect()
    }

    pub fn as_trace(&self) -> DerivationTrace {
        DerivationTrace {
            records: self.steps.clone(),
        }
    }
}

/// Restricts a trace to the ancestors of its empty clause.
pub fn extract_proof(trace: &DerivationTrace) -> Option<ProofObject> {
    let ids = trace.proof_ids()?;
    let steps = trace.records.iter().filter(|r| ids.contains(&r.id)).cloned().collect();
    Some(ProofObject { steps })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {reason}")]
pub struct ProofCheckError {
    pub step: ClauseId,
    pub reason: String,
}

/// Checks every step of `proof` against `problem`.
pub fn check_proof(proof: &ProofObject, problem: &Problem) -> Result<(), ProofCheckError> {
    let fail = |step: ClauseId, reason: &str| ProofCheckError {
        step,
        reason: reason.to_string(),
    };
    let Some(last) = proof.steps.last() else {
        return Err(fail(ClauseId(0), "proof is empty"));
    };
    if !last.is_empty_clause() {
        return Err(fail(last.id, "last step is not the empty clause"));
    }
    let mut known: HashMap<ClauseId, Clause> = HashMap::new();
    for step in &proof.steps {
        let clause = step.clause();
        if step.parents.len() != step.rule.parent_count() {
            return Err(fail(step.id, "wrong number of parents"));
        }
        let parents: Vec<&Clause> = match step.parents.iter().map(|p| known.get(p)).collect::<Option<Vec<_>>>() {
            Some(ps) => ps,
            None => return Err(fail(step.id, "parent missing or not derived earlier")),
        };
        let ok = match step.rule {
            Rule::Input => problem.input_clauses().any(|c| is_variant(c, &clause)),
            Rule::Resolution => replay_resolution(parents[0], parents[1])
                .iter()
                .any(|r| is_variant(r, &clause)),
            Rule::Factoring => replay_factoring(parents[0]).iter().any(|r| is_variant(r, &clause)),
        };
        if !ok {
            let reason = match step.rule {
                Rule::Input => "input clause does not occur in the problem",
                Rule::Resolution => "clause is not a resolvent of its parents",
                Rule::Factoring => "clause is not a factor of its parent",
            };
            return Err(fail(step.id, reason));
        }
        known.insert(step.id, clause);
    }
    Ok(())
}

/// Same literal set up to variable renaming: mutual subsumption of clauses
/// with the same number of distinct literals.
fn is_variant(a: &Clause, b: &Clause) -> bool {
    a.len() == b.len() && subsumes(a, b) && subsumes(b, a)
}

fn shift(t: &Term, by: u32) -> Term {
    t.map_vars(&mut |v| Term::Var(v + by))
}

fn distinct(lits: Vec<Literal>) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::new();
    for l in lits {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

fn replay_resolution(a: &Clause, b: &Clause) -> Vec<Clause> {
    let by = a.max_var().map_or(0, |m| m + 1);
    let b_lits: Vec<Literal> = b
        .literals
        .iter()
        .map(|l| Literal::new(l.positive, shift(&l.atom, by)))
        .collect();
    let mut out = Vec::new();
    for (i, la) in a.literals.iter().enumerate() {
        for (j, lb) in b_lits.iter().enumerate() {
            if la.positive == lb.positive {
                continue;
            }
            let Some(s) = unify(&la.atom, &lb.atom) else {
                continue;
            };
            let lits = a
                .literals
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .chain(b_lits.iter().enumerate().filter(|(k, _)| *k != j))
                .map(|(_, l)| Literal::new(l.positive, s.apply(&l.atom)))
                .collect();
            out.push(Clause::input(ClauseId(0), distinct(lits)));
        }
    }
    out
}

fn replay_factoring(a: &Clause) -> Vec<Clause> {
    let mut out = Vec::new();
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i == j || a.literals[i].positive != a.literals[j].positive {
                continue;
            }
            let Some(s) = unify(&a.literals[i].atom, &a.literals[j].atom) else {
                continue;
            };
            let lits = a
                .literals
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, l)| Literal::new(l.positive, s.apply(&l.atom)))
                .collect();
            out.push(Clause::input(ClauseId(0), distinct(lits)));
        }
    }
    out
}
