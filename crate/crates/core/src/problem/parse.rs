//! Reader for the CNF problem syntax:
//!
//! ```text
//! % comment
//! cnf(name, axiom, p(X) | ~q(f(X), a)).
//! cnf(goal, negated_conjecture, ~p(a)).
//! ```
//!
//! Symbols start with a lowercase letter, variables with an uppercase letter
//! or `_`. `$false` denotes the empty clause.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::logic::{Clause, ClauseId, Literal, Symbol, Term, Var, UNASSIGNED};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("symbol `{symbol}` used with arity {first} and arity {second}")]
    ArityConflict {
        symbol: String,
        first: usize,
        second: usize,
    },
    #[error("symbol `{symbol}` used both as predicate and as function")]
    KindConflict { symbol: String },
    #[error("problem contains no clauses")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Axiom,
    NegatedConjecture,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Axiom => "axiom",
            Role::NegatedConjecture => "negated_conjecture",
        }
    }

    fn parse(s: &str) -> Option<Role> {
        match s {
            "axiom" | "hypothesis" | "definition" | "lemma" | "theorem" | "plain" => Some(Role::Axiom),
            "negated_conjecture" => Some(Role::NegatedConjecture),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InputClause {
    pub name: String,
    pub role: Role,
    pub clause: Clause,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub clauses: Vec<InputClause>,
}

impl Problem {
    pub fn with_name(mut self, name: impl Into<String>) -> Problem {
        self.name = name.into();
        self
    }

    pub fn load(path: &std::path::Path) -> Result<Problem, crate::Error> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(parse_problem(&text)?.with_name(name))
    }

    pub fn input_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().map(|c| &c.clause)
    }

    /// Renders the problem back into the CNF syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            out.push_str(&format!(
                "cnf({}, {}, {}).\n",
                c.name,
                c.role.as_str(),
                cnf_body(&c.clause)
            ));
        }
        out
    }
}

fn cnf_body(c: &Clause) -> String {
    let lits = c.normalized_literals();
    if lits.is_empty() {
        return "$false".into();
    }
    lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" | ")
}

/// Parses a whole problem file. Clauses receive ids 0, 1, ... in file order.
pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let mut p = Parser::new(text);
    let mut clauses = Vec::new();
    p.skip_ws();
    while !p.at_end() {
        let kw = p.ident()?;
        if kw != "cnf" {
            return Err(p.error(format!("expected `cnf`, found `{kw}`")));
        }
        p.expect('(')?;
        let name = p.name()?;
        p.expect(',')?;
        let role_pos = p.pos();
        let role_text = p.ident()?;
        let role =
            Role::parse(&role_text).ok_or_else(|| p.error_at(role_pos, format!("unknown role `{role_text}`")))?;
        p.expect(',')?;
        p.vars.clear();
        let mut lits = p.disjunction()?;
        p.expect(')')?;
        p.expect('.')?;
        lits = crate::logic::rename_from(&lits, 0);
        // clauses are sets: repeated literals are merged
        let clause = Clause::input(ClauseId(clauses.len() as u32), crate::logic::dedup_literals(lits));
        clauses.push(InputClause { name, role, clause });
        p.skip_ws();
    }
    if clauses.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(Problem {
        name: String::new(),
        clauses,
    })
}

/// Parses a single disjunction such as `p(X) | ~q(a)` or `$false`. The
/// returned clause has rule `Input` and an unassigned id.
pub fn parse_clause(text: &str) -> Result<Clause, ParseError> {
    let mut p = Parser::new(text);
    let lits = p.disjunction()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("trailing input after clause".into()));
    }
    Ok(Clause::input(UNASSIGNED, crate::logic::rename_from(&lits, 0)))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Predicate,
    Function,
}

struct Parser<'a> {
    src: &'a str,
    at: usize,
    symbols: HashMap<String, (Symbol, Kind)>,
    vars: HashMap<String, Var>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Parser<'a> {
        Parser {
            src,
            at: 0,
            symbols: HashMap::new(),
            vars: HashMap::new(),
        }
    }

    fn pos(&self) -> usize {
        self.at
    }

    fn at_end(&self) -> bool {
        self.at >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.at..].chars().next()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => self.at += c.len_utf8(),
                Some('%') => {
                    while let Some(c) = self.peek() {
                        self.at += c.len_utf8();
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    fn line_col(&self, at: usize) -> (usize, usize) {
        let before = &self.src[..at.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before
            .rfind('\n')
            .map_or(before.chars().count(), |nl| before[nl + 1..].chars().count())
            + 1;
        (line, column)
    }

    fn error_at(&self, at: usize, message: String) -> ParseError {
        let (line, column) = self.line_col(at);
        ParseError::Syntax { line, column, message }
    }

    fn error(&self, message: String) -> ParseError {
        self.error_at(self.at, message)
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(d) if d == c => {
                self.at += c.len_utf8();
                Ok(())
            }
            Some(d) => Err(self.error(format!("expected `{c}`, found `{d}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of input"))),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.at += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.at;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || (c == '$' && self.at == start) {
                self.at += 1;
            } else {
                break;
            }
        }
        if start == self.at {
            return Err(match self.peek() {
                Some(c) => self.error(format!("expected identifier, found `{c}`")),
                None => self.error("expected identifier, found end of input".into()),
            });
        }
        Ok(self.src[start..self.at].to_string())
    }

    fn name(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            let start = self.at;
            self.at += 1;
            while let Some(c) = self.peek() {
                self.at += c.len_utf8();
                if c == '\'' {
                    return Ok(self.src[start + 1..self.at - 1].to_string());
                }
            }
            return Err(self.error_at(start, "unterminated quoted name".into()));
        }
        self.ident()
    }

    fn disjunction(&mut self) -> Result<Vec<Literal>, ParseError> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.at += 1;
            let lits = self.disjunction()?;
            self.expect(')')?;
            return Ok(lits);
        }
        let mut lits = Vec::new();
        loop {
            if let Some(l) = self.literal()? {
                lits.push(l);
            }
            if !self.eat('|') {
                break;
            }
        }
        Ok(lits)
    }

    /// `None` for `$false`.
    fn literal(&mut self) -> Result<Option<Literal>, ParseError> {
        let positive = !self.eat('~');
        self.skip_ws();
        let start = self.at;
        let name = self.ident()?;
        if name == "$false" {
            return if positive {
                Ok(None)
            } else {
                Err(self.error_at(start, "`$false` cannot be negated".into()))
            };
        }
        if !name.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(self.error_at(start, format!("expected predicate symbol, found `{name}`")));
        }
        let atom = self.application(name, Kind::Predicate)?;
        Ok(Some(Literal::new(positive, atom)))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        self.skip_ws();
        let start = self.at;
        let name = self.ident()?;
        if name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
            let next = self.vars.len() as Var;
            return Ok(Term::Var(*self.vars.entry(name).or_insert(next)));
        }
        if !name.starts_with(|c: char| c.is_ascii_lowercase() || c.is_ascii_digit()) {
            return Err(self.error_at(start, format!("unexpected `{name}`")));
        }
        self.application(name, Kind::Function)
    }

    fn application(&mut self, name: String, kind: Kind) -> Result<Term, ParseError> {
        let mut args = Vec::new();
        if self.eat('(') {
            loop {
                args.push(self.term()?);
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(')')?;
        }
        let sym = self.symbol(&name, args.len(), kind)?;
        Ok(Term::app(sym, args))
    }

    fn symbol(&mut self, name: &str, arity: usize, kind: Kind) -> Result<Symbol, ParseError> {
        match self.symbols.get(name) {
            Some((sym, k)) => {
                if sym.arity() != arity {
                    return Err(ParseError::ArityConflict {
                        symbol: name.to_string(),
                        first: sym.arity(),
                        second: arity,
                    });
                }
                if *k != kind {
                    return Err(ParseError::KindConflict {
                        symbol: name.to_string(),
                    });
                }
                Ok(sym.clone())
            }
            None => {
                let sym = Symbol::new(name, arity);
                self.symbols.insert(name.to_string(), (sym.clone(), kind));
                Ok(sym)
            }
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
