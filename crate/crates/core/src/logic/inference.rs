//! Generating inferences: binary resolution and factoring.
//!
//! Parents are renamed apart by offsetting the second parent's variables
//! past the first parent's largest variable. Conclusions are renumbered to
//! start above every variable of their parents, so a child never shares a
//! variable id with a parent.

use std::collections::HashSet;

use super::clause::{dedup_literals, rename_from, Clause, ClauseId, Literal, Rule};
use super::subst::unify;
use super::term::Var;

/// Id carried by freshly generated clauses until the prover numbers them.
pub const UNASSIGNED: ClauseId = ClauseId(u32::MAX);

fn next_var(c: &Clause) -> Var {
    c.max_var().map_or(0, |m| m + 1)
}

/// Binary resolvent of `c1` on literal `i` with `c2` on literal `j`.
///
/// Returns `None` if the literals have the same polarity or their atoms do
/// not unify. Repeated literals in the conclusion are merged.
pub fn resolve(c1: &Clause, i: usize, c2: &Clause, j: usize) -> Option<Clause> {
    let l1 = &c1.literals[i];
    let l2 = &c2.literals[j];
    if l1.positive == l2.positive || l1.predicate() != l2.predicate() {
        return None;
    }
    let offset = next_var(c1);
    let a2 = l2.atom.offset_vars(offset);
    let sigma = unify(&l1.atom, &a2)?;

    let mut lits = Vec::with_capacity(c1.len() + c2.len() - 2);
    for (k, l) in c1.literals.iter().enumerate() {
        if k != i {
            lits.push(Literal::new(l.positive, sigma.apply(&l.atom)));
        }
    }
    for (k, l) in c2.literals.iter().enumerate() {
        if k != j {
            lits.push(Literal::new(l.positive, sigma.apply(&l.atom.offset_vars(offset))));
        }
    }
    let base = next_var(c1).max(next_var(c2));
    let lits = rename_from(&dedup_literals(lits), base);
    Some(Clause::derived(UNASSIGNED, lits, Rule::Resolution, vec![c1.id, c2.id]))
}

/// All binary resolvents between `c1` and `c2`, with `c1` as first parent.
pub fn resolvents(c1: &Clause, c2: &Clause) -> Vec<Clause> {
    let mut out = Vec::new();
    for i in 0..c1.len() {
        for j in 0..c2.len() {
            if let Some(r) = resolve(c1, i, c2, j) {
                out.push(r);
            }
        }
    }
    out
}

/// All proper factors of `c`: for each pair of same-polarity literals whose
/// atoms unify, the clause with the mgu applied and the duplicate removed.
/// Variants are reported once.
pub fn factor(c: &Clause) -> Vec<Clause> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let base = next_var(c);
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            let (li, lj) = (&c.literals[i], &c.literals[j]);
            if li.positive != lj.positive || li.predicate() != lj.predicate() {
                continue;
            }
            let Some(sigma) = unify(&li.atom, &lj.atom) else {
                continue;
            };
            let lits: Vec<Literal> = c
                .literals
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, l)| Literal::new(l.positive, sigma.apply(&l.atom)))
                .collect();
            let lits = rename_from(&dedup_literals(lits), base);
            let f = Clause::derived(UNASSIGNED, lits, Rule::Factoring, vec![c.id]);
            if seen.insert(f.variant_key()) {
                out.push(f);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_clause;

    fn cl(id: u32, text: &str) -> Clause {
        let mut c = parse_clause(text).unwrap();
        c.id = ClauseId(id);
        c
    }

    #[test]
    fn textbook_resolvent() {
        let c1 = cl(1, "p(X) | q(X)");
        let c2 = cl(2, "~p(a)");
        let r = resolve(&c1, 0, &c2, 0).unwrap();
        assert_eq!(r.canonical_text(), "q(a)");
        assert_eq!(r.parents, vec![ClauseId(1), ClauseId(2)]);
        assert_eq!(r.rule, Rule::Resolution);
    }

    #[test]
    fn distinct_constants_do_not_resolve() {
        assert!(resolve(&cl(1, "p(a)"), 0, &cl(2, "~p(b)"), 0).is_none());
    }

    #[test]
    fn same_polarity_does_not_resolve() {
        assert!(resolve(&cl(1, "p(a)"), 0, &cl(2, "p(a)"), 0).is_none());
    }

    #[test]
    fn one_step_chain() {
        let c1 = cl(1, "p(f(X)) | ~p(X)");
        let r = resolve(&c1, 1, &cl(2, "p(a)"), 0).unwrap();
        assert_eq!(r.canonical_text(), "p(f(a))");
    }

    #[test]
    fn self_resolution_renames_apart() {
        let c = cl(1, "~p(X) | p(f(X))");
        let rs = resolvents(&c, &c);
        let texts: Vec<_> = rs.iter().map(|r| r.canonical_text()).collect();
        assert!(texts.contains(&"~p(X0) | p(f(f(X0)))".to_string()), "{texts:?}");
    }

    #[test]
    fn resolvent_merges_duplicates() {
        let r = resolve(&cl(1, "p | q"), 0, &cl(2, "~p | q"), 0).unwrap();
        assert_eq!(r.canonical_text(), "q");
    }

    #[test]
    fn factors() {
        let fs = factor(&cl(1, "p(X) | p(a)"));
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0].canonical_text(), "p(a)");
        assert_eq!(fs[0].parents, vec![ClauseId(1)]);
        assert!(factor(&cl(1, "p(a) | q(b)")).is_empty());
        let fs = factor(&cl(1, "p(X) | p(Y)"));
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0].canonical_text(), "p(X0)");
        assert!(factor(&cl(1, "p(X) | ~p(X)")).is_empty());
    }

    #[test]
    fn children_do_not_share_parent_variables() {
        let c1 = cl(1, "p(X,Y) | q(Y)");
        let c2 = cl(2, "~p(a,Z) | r(Z,W)");
        let r = resolve(&c1, 0, &c2, 0).unwrap();
        for v in r.vars() {
            assert!(!c1.vars().contains(&v));
            assert!(!c2.vars().contains(&v));
        }
    }
}
