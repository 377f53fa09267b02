use std::collections::HashMap;
use std::fmt;

use super::term::{Term, Var};

/// A possibly negated atom. The head symbol of `atom` is a predicate.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Term,
}

impl Literal {
    pub fn new(positive: bool, atom: Term) -> Literal {
        debug_assert!(!atom.is_var(), "literal atom must be a predicate application");
        Literal { positive, atom }
    }

    pub fn pos(atom: Term) -> Literal {
        Literal::new(true, atom)
    }

    pub fn neg(atom: Term) -> Literal {
        Literal::new(false, atom)
    }

    pub fn negated(&self) -> Literal {
        Literal::new(!self.positive, self.atom.clone())
    }

    pub fn predicate(&self) -> &super::term::Symbol {
        match &self.atom {
            Term::App(s, _) => s,
            Term::Var(_) => unreachable!("literal atom is never a variable"),
        }
    }

    pub fn map_vars(&self, f: &mut impl FnMut(Var) -> Term) -> Literal {
        Literal {
            positive: self.positive,
            atom: self.atom.map_vars(f),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("~")?;
        }
        write!(f, "{}", self.atom)
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseId(pub u32);

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a clause was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Input,
    Resolution,
    Factoring,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Input => "input",
            Rule::Resolution => "resolution",
            Rule::Factoring => "factoring",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        match s {
            "input" => Some(Rule::Input),
            "resolution" => Some(Rule::Resolution),
            "factoring" => Some(Rule::Factoring),
            _ => None,
        }
    }

    pub fn parent_count(self) -> usize {
        match self {
            Rule::Input => 0,
            Rule::Factoring => 1,
            Rule::Resolution => 2,
        }
    }
}

/// A disjunction of literals with provenance. The empty clause is the
/// contradiction.
#[derive(Clone, Debug)]
pub struct Clause {
    pub id: ClauseId,
    pub literals: Vec<Literal>,
    pub parents: Vec<ClauseId>,
    pub rule: Rule,
    pub frozen: bool,
    /// Evaluation weight assigned when the clause is queued; lower is better.
    pub weight: f64,
}

impl Clause {
    pub fn input(id: ClauseId, literals: Vec<Literal>) -> Clause {
        Clause::derived(id, literals, Rule::Input, Vec::new())
    }

    pub fn derived(id: ClauseId, literals: Vec<Literal>, rule: Rule, parents: Vec<ClauseId>) -> Clause {
        debug_assert_eq!(rule.parent_count(), parents.len());
        Clause {
            id,
            literals,
            parents,
            rule,
            frozen: false,
            weight: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_unit(&self) -> bool {
        self.literals.len() == 1
    }

    pub fn is_ground(&self) -> bool {
        self.literals.iter().all(|l| l.atom.is_ground())
    }

    pub fn max_var(&self) -> Option<Var> {
        self.literals.iter().filter_map(|l| l.atom.max_var()).max()
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut vars = Vec::new();
        for l in &self.literals {
            l.atom.for_each_var(&mut |v| {
                if !vars.contains(&v) {
                    vars.push(v)
                }
            });
        }
        vars
    }

    /// Literals with variables renumbered from 0 in order of first occurrence.
    pub fn normalized_literals(&self) -> Vec<Literal> {
        rename_from(&self.literals, 0)
    }

    /// Canonical text: variables renumbered from `X0`, literal order kept,
    /// `$false` for the empty clause.
    pub fn canonical_text(&self) -> String {
        literals_text(&self.normalized_literals())
    }

    /// Key identifying the clause up to variable renaming and literal order.
    /// Equal keys imply the clauses are variants; the converse can fail for
    /// non-ground clauses whose literals differ only in variable names.
    pub fn variant_key(&self) -> String {
        let mut lits: Vec<(String, &Literal)> = self.literals.iter().map(|l| (erase_vars(l).to_string(), l)).collect();
        lits.sort_by(|a, b| a.0.cmp(&b.0));
        let ordered: Vec<Literal> = lits.into_iter().map(|(_, l)| l.clone()).collect();
        literals_text(&rename_from(&ordered, 0))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&literals_text(&self.literals))
    }
}

pub fn literals_text(lits: &[Literal]) -> String {
    if lits.is_empty() {
        return "$false".to_string();
    }
    lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" | ")
}

/// Renumbers variables densely starting at `base`, in order of first
/// occurrence.
pub fn rename_from(lits: &[Literal], base: Var) -> Vec<Literal> {
    let mut map: HashMap<Var, Var> = HashMap::new();
    lits.iter()
        .map(|l| {
            l.map_vars(&mut |v| {
                let next = base + map.len() as Var;
                Term::Var(*map.entry(v).or_insert(next))
            })
        })
        .collect()
}

/// Drops repeated literals, keeping the first occurrence.
pub fn dedup_literals(lits: Vec<Literal>) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::with_capacity(lits.len());
    for l in lits {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

fn erase_vars(l: &Literal) -> Literal {
    l.map_vars(&mut |_| Term::Var(0))
}
