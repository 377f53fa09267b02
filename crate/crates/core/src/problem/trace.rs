//! Derivation traces: every clause generated during a run, with parent
//! edges and processed/proof markers.
//!
//! Text form, one record per line after the header, tabs shown as `→`:
//!
//! ```text
//! TRACE v1
//! 0→input→→P→*→p(a)
//! 1→input→→P→*→~p(X0)
//! 2→resolution→1,0→.→*→$false
//! ```
//!
//! Fields are tab separated: id, rule, comma separated parent ids, `P` or `.`
//! for processed, `*` or `.` for membership in the proof, clause text.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::parse::parse_clause;
use crate::logic::{Clause, ClauseId, Literal, Rule};

pub const TRACE_HEADER: &str = "TRACE v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub id: ClauseId,
    pub rule: Rule,
    pub parents: Vec<ClauseId>,
    pub processed: bool,
    pub in_proof: bool,
    /// Literals with variables renumbered from 0.
    pub literals: Vec<Literal>,
}

impl TraceRecord {
    pub fn from_clause(c: &Clause) -> TraceRecord {
        TraceRecord {
            id: c.id,
            rule: c.rule,
            parents: c.parents.clone(),
            processed: false,
            in_proof: false,
            literals: c.normalized_literals(),
        }
    }

    pub fn clause(&self) -> Clause {
        Clause::derived(self.id, self.literals.clone(), self.rule, self.parents.clone())
    }

    pub fn is_empty_clause(&self) -> bool {
        self.literals.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DerivationTrace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("missing `{TRACE_HEADER}` header")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl DerivationTrace {
    pub fn new() -> DerivationTrace {
        DerivationTrace::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(record.parents.iter().all(|p| *p < record.id));
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: ClauseId) -> Option<&TraceRecord> {
        // ids are assigned densely in creation order, but stay robust to gaps
        match self.records.get(id.0 as usize) {
            Some(r) if r.id == id => Some(r),
            _ => self.records.iter().find(|r| r.id == id),
        }
    }

    pub fn empty_clause(&self) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.is_empty_clause())
    }

    /// Ids of the empty clause and all its ancestors, ascending.
    pub fn proof_ids(&self) -> Option<BTreeSet<ClauseId>> {
        let root = self.empty_clause()?;
        let index: HashMap<ClauseId, &TraceRecord> = self.records.iter().map(|r| (r.id, r)).collect();
        let mut seen = BTreeSet::new();
        let mut stack = vec![root.id];
        while let Some(id) = stack.pop() {
            if seen.insert(id) {
                if let Some(r) = index.get(&id) {
                    stack.extend(r.parents.iter().copied());
                }
            }
        }
        Some(seen)
    }

    /// Sets `in_proof` on exactly the ancestors of the empty clause.
    pub fn mark_proof(&mut self) {
        let ids = self.proof_ids().unwrap_or_default();
        for r in &mut self.records {
            r.in_proof = ids.contains(&r.id);
        }
    }
}

/// Renders a trace in the line format described in the module docs.
pub fn write_trace(trace: &DerivationTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let parents = r.parents.iter().map(|p| p.0.to_string()).collect::<Vec<_>>().join(",");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.id,
            r.rule.as_str(),
            parents,
            if r.processed { "P" } else { "." },
            if r.in_proof { "*" } else { "." },
            crate::logic::literals_text(&r.literals),
        ));
    }
    out
}

pub fn read_trace(text: &str) -> Result<DerivationTrace, TraceError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TRACE_HEADER => {}
        _ => return Err(TraceError::MissingHeader),
    }
    let mut trace = DerivationTrace::new();
    for (n, line) in lines {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| TraceError::Malformed { line: line_no, message };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0]
            .parse::<u32>()
            .map(ClauseId)
            .map_err(|e| bad(format!("bad id: {e}")))?;
        let rule = Rule::parse(fields[1]).ok_or_else(|| bad(format!("unknown rule `{}`", fields[1])))?;
        let parents = if fields[2].is_empty() || fields[2] == "-" {
            Vec::new()
        } else {
            fields[2]
                .split(',')
                .map(|p| p.parse::<u32>().map(ClauseId))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("bad parent id: {e}")))?
        };
        if parents.len() != rule.parent_count() {
            return Err(bad(format!(
                "rule {} expects {} parents",
                rule.as_str(),
                rule.parent_count()
            )));
        }
        let processed = flag(fields[3], "P").ok_or_else(|| bad("processed flag must be `P` or `.`".into()))?;
        let in_proof = flag(fields[4], "*").ok_or_else(|| bad("proof flag must be `*` or `.`".into()))?;
        let clause = parse_clause(fields[5]).map_err(|e| bad(e.to_string()))?;
        trace.records.push(TraceRecord {
            id,
            rule,
            parents,
            processed,
            in_proof,
            literals: clause.literals,
        });
    }
    Ok(trace)
}

fn flag(field: &str, on: &str) -> Option<bool> {
    match field {
        f if f == on => Some(true),
        "." => Some(false),
        _ => None,
    }
}
