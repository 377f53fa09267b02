//! Substitutions, Robinson unification with occurs check, and one-way
//! matching.

use std::collections::HashMap;
use std::fmt;

use super::term::{Term, Var};

/// A finite map from variables to terms.
///
/// Substitutions returned by [`unify`] are idempotent: no bound variable
/// occurs in any binding.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: HashMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn get(&self, v: Var) -> Option<&Term> {
        self.bindings.get(&v)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn bind(&mut self, v: Var, t: Term) {
        self.bindings.insert(v, t);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Term)> {
        self.bindings.iter().map(|(v, t)| (*v, t))
    }

    /// Applies the substitution once (not to a fixpoint).
    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        t.map_vars(&mut |v| self.bindings.get(&v).cloned().unwrap_or(Term::Var(v)))
    }

    /// Follows variable bindings until reaching an unbound variable or a
    /// compound term. Only meaningful for triangular substitutions built
    /// during unification.
    fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.bindings.get(v) {
                Some(b) => t = b,
                None => break,
            }
        }
        t
    }

    fn occurs_walk(&self, v: Var, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => *w == v,
            Term::App(_, args) => args.iter().any(|a| self.occurs_walk(v, a)),
        }
    }

    fn resolve_fully(&self, t: &Term) -> Term {
        match self.walk(t) {
            Term::Var(v) => Term::Var(*v),
            Term::App(s, args) if args.is_empty() => Term::App(s.clone(), args.clone()),
            Term::App(s, args) => Term::App(
                s.clone(),
                args.iter().map(|a| self.resolve_fully(a)).collect::<Vec<_>>().into(),
            ),
        }
    }

    /// Turns a triangular substitution into an idempotent one.
    fn normalize(self) -> Substitution {
        let bindings = self
            .bindings
            .keys()
            .map(|v| (*v, self.resolve_fully(&Term::Var(*v))))
            .collect();
        Substitution { bindings }
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut entries: Vec<_> = self.bindings.iter().collect();
        entries.sort_by_key(|(v, _)| **v);
        f.write_str("{")?;
        for (i, (v, t)) in entries.into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "X{v}↦{t}")?;
        }
        f.write_str("}")
    }
}

/// Most general unifier of `a` and `b`, or `None` when they do not unify.
pub fn unify(a: &Term, b: &Term) -> Option<Substitution> {
    let mut s = Substitution::new();
    if unify_into(&mut s, a, b) {
        Some(s.normalize())
    } else {
        None
    }
}

/// Unifies several term pairs simultaneously.
pub fn unify_all<'a>(pairs: impl IntoIterator<Item = (&'a Term, &'a Term)>) -> Option<Substitution> {
    let mut s = Substitution::new();
    for (a, b) in pairs {
        if !unify_into(&mut s, a, b) {
            return None;
        }
    }
    Some(s.normalize())
}

fn unify_into(s: &mut Substitution, a: &Term, b: &Term) -> bool {
    let mut stack = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = stack.pop() {
        let x = s.walk(&x).clone();
        let y = s.walk(&y).clone();
        match (&x, &y) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if s.occurs_walk(*v, t) {
                    return false;
                }
                s.bind(*v, t.clone());
            }
            (Term::App(f, xs), Term::App(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return false;
                }
                stack.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
        }
    }
    true
}

/// One-way matching: extends `s` so that `pattern·s == target`, binding only
/// variables of `pattern`. Variables of `target` are treated as constants.
pub fn match_into(s: &mut Substitution, pattern: &Term, target: &Term) -> bool {
    match pattern {
        Term::Var(v) => match s.get(*v) {
            Some(bound) => bound == target,
            None => {
                s.bind(*v, target.clone());
                true
            }
        },
        Term::App(f, xs) => match target {
            Term::App(g, ys) if f == g && xs.len() == ys.len() => {
                xs.iter().zip(ys.iter()).all(|(x, y)| match_into(s, x, y))
            }
            _ => false,
        },
    }
}
