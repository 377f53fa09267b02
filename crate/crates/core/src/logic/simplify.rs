use super::clause::{Clause, Literal};
use super::subst::{match_into, Substitution};

/// True iff the clause contains some atom both positively and negatively.
pub fn is_tautology(c: &Clause) -> bool {
    c.literals.iter().enumerate().any(|(i, a)| {
        c.literals[i + 1..]
            .iter()
            .any(|b| a.positive != b.positive && a.atom == b.atom)
    })
}

/// True iff some substitution maps `c1`'s literals injectively onto
/// literals of `c2`.
pub fn subsumes(c1: &Clause, c2: &Clause) -> bool {
    if c1.len() > c2.len() {
        return false;
    }
    let mut used = vec![false; c2.len()];
    subsumes_from(&c1.literals, &c2.literals, &mut used, &Substitution::new())
}

fn subsumes_from(rest: &[Literal], target: &[Literal], used: &mut [bool], s: &Substitution) -> bool {
    let Some((first, rest)) = rest.split_first() else {
        return true;
    };
    for (k, t) in target.iter().enumerate() {
        if used[k] || t.positive != first.positive {
            continue;
        }
        let mut s2 = s.clone();
        if match_into(&mut s2, &first.atom, &t.atom) {
            used[k] = true;
            if subsumes_from(rest, target, used, &s2) {
                return true;
            }
            used[k] = false;
        }
    }
    false
}

/// True iff the unit literal `unit` matches some literal of `c`.
pub fn unit_subsumes(unit: &Literal, c: &Clause) -> bool {
    c.literals
        .iter()
        .any(|l| l.positive == unit.positive && match_into(&mut Substitution::new(), &unit.atom, &l.atom))
}

/// Weighted count of symbol and variable occurrences over all literals.
/// Predicate symbols count as symbols.
pub fn symbol_weight(c: &Clause, fw: u64, vw: u64) -> u64 {
    c.literals
        .iter()
        .map(|l| {
            let (syms, vars) = l.atom.size();
            syms as u64 * fw + vars as u64 * vw
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_clause;

    fn cl(text: &str) -> Clause {
        parse_clause(text).unwrap()
    }

    #[test]
    fn tautologies() {
        assert!(is_tautology(&cl("p(a) | ~p(a)")));
        assert!(!is_tautology(&cl("p(a) | ~p(b)")));
        assert!(!is_tautology(&cl("$false")));
        assert!(!is_tautology(&cl("p(X) | ~p(Y)")));
    }

    #[test]
    fn subsumption_examples() {
        assert!(subsumes(&cl("p(X)"), &cl("p(a) | q(b)")));
        assert!(!subsumes(&cl("p(a)"), &cl("p(X)")));
        let c = cl("p(X) | ~q(X, f(Y))");
        assert!(subsumes(&c, &c));
        // injectivity: p(X) | p(Y) does not subsume the unit p(a)
        assert!(!subsumes(&cl("p(X) | p(Y)"), &cl("p(a)")));
        assert!(subsumes(&cl("p(X) | p(Y)"), &cl("p(a) | p(b)")));
        // consistent bindings across literals
        assert!(!subsumes(&cl("p(X) | q(X)"), &cl("p(a) | q(b)")));
        assert!(subsumes(&cl("$false"), &cl("p(a)")));
    }

    #[test]
    fn unit_subsumption() {
        assert!(unit_subsumes(&cl("p(X)").literals[0], &cl("q(a) | p(f(b))")));
        assert!(!unit_subsumes(&cl("~p(X)").literals[0], &cl("q(a) | p(f(b))")));
    }

    #[test]
    fn weights() {
        assert_eq!(symbol_weight(&cl("p(f(a),X)"), 2, 1), 7);
        assert_eq!(symbol_weight(&cl("$false"), 2, 1), 0);
        assert_eq!(symbol_weight(&cl("p(X) | q(X)"), 2, 1), 6);
    }
}
