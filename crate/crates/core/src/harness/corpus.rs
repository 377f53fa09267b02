//! Seeded problem generators and the train/dev/holdout split.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problem::{parse_problem, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Implication chain from a fact to a refuted goal, with side chains
    /// that build ever deeper terms.
    Chain,
    /// Reachability in a layered graph with many distractor edges.
    Grid,
    /// Reflexive-symmetric-transitive closure of a few edge chains.
    Equivalence,
    /// Ground pigeonhole: one more pigeon than holes.
    Pigeonhole,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Chain, Family::Grid, Family::Equivalence, Family::Pigeonhole];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Chain => "chain",
            Family::Grid => "grid",
            Family::Equivalence => "equivalence",
            Family::Pigeonhole => "pigeonhole",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Family, String> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown family `{s}` (chain, grid, equivalence, pigeonhole)"))
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

struct Writer {
    text: String,
    n: usize,
}

impl Writer {
    fn new(comment: &str) -> Writer {
        Writer {
            text: format!("% {comment}\n"),
            n: 0,
        }
    }

    fn axiom(&mut self, lits: &str) {
        writeln!(self.text, "cnf(a{}, axiom, {lits}).", self.n).unwrap();
        self.n += 1;
    }

    fn goal(&mut self, lits: &str) {
        writeln!(self.text, "cnf(goal, negated_conjecture, {lits}).").unwrap();
    }

    fn finish(self, name: String) -> Problem {
        parse_problem(&self.text)
            .unwrap_or_else(|e| panic!("generated problem {name} does not parse: {e}"))
            .with_name(name)
    }
}

/// Main chain `p0 -> ... -> pL` over a binary predicate with a compound
/// argument, plus a web of light unary junk predicates hanging off it. Junk
/// clauses are lighter than chain clauses, so weight-based selection
/// exhausts much of the junk first.
fn chain(rng: &mut ChaCha8Rng, name: String) -> Problem {
    let len = rng.gen_range(4..=10);
    let junk = rng.gen_range(3..=16);
    let mut w = Writer::new(&format!("chain of length {len} with {junk} junk predicates"));
    let arg = "f(c, c)";
    w.axiom(&format!("p0(c, {arg})"));
    let mut rules = Vec::new();
    for i in 0..len {
        rules.push(format!("~p{i}(X, Y) | p{}(X, Y)", i + 1));
    }
    for k in 0..junk {
        if k < len || rng.gen_bool(0.3) {
            rules.push(format!("~p{}(X, Y) | j{k}(X)", rng.gen_range(0..len)));
        }
        for _ in 0..rng.gen_range(1..=3) {
            rules.push(format!("~j{k}(X) | j{}(X)", rng.gen_range(0..junk)));
        }
        if rng.gen_bool(0.15) {
            let (a, b) = (rng.gen_range(0..junk), rng.gen_range(0..junk));
            rules.push(format!("~j{k}(X) | ~j{a}(X) | j{b}(X)"));
        }
    }
    rules.sort();
    rules.dedup();
    rules.shuffle(rng);
    for r in &rules {
        w.axiom(r);
    }
    w.goal(&format!("~p{len}(c, {arg})"));
    w.finish(name)
}

/// Layers of nodes with random forward edges; the goal asks for a node in
/// the last layer, reachable along one planted path.
fn grid(rng: &mut ChaCha8Rng, name: String) -> Problem {
    let layers = rng.gen_range(5..=10);
    let width = rng.gen_range(4..=9);
    let extra = rng.gen_range(1..=3);
    let mut w = Writer::new(&format!("reachability over {layers} layers of width {width}"));
    let node = |l: usize, k: usize| format!("n{l}_{k}");
    let mut facts = Vec::new();
    let mut path = vec![0usize];
    for l in 1..layers {
        path.push(rng.gen_range(0..width));
        facts.push(format!("edge({}, {})", node(l - 1, path[l - 1]), node(l, path[l])));
    }
    for l in 0..layers - 1 {
        for k in 0..width {
            for _ in 0..extra {
                let to = rng.gen_range(0..width);
                // keep the last layer reachable only through the planted path
                if l + 1 == layers - 1 && to == path[layers - 1] {
                    continue;
                }
                facts.push(format!("edge({}, {})", node(l, k), node(l + 1, to)));
            }
        }
    }
    facts.sort();
    facts.dedup();
    facts.shuffle(rng);
    w.axiom(&format!("reach({}, z)", node(0, 0)));
    w.axiom("~reach(X, N) | ~edge(X, Y) | reach(Y, s(N))");
    if rng.gen_bool(0.5) {
        w.axiom("~edge(X, Y) | linked(X)");
    }
    if rng.gen_bool(0.7) {
        w.axiom("~edge(X, Y) | ~edge(Y, Z) | hop(X, Z)");
    }
    if rng.gen_bool(0.3) {
        w.axiom("~hop(X, Y) | ~edge(Y, Z) | hop3(X, Z)");
    }
    for f in &facts {
        w.axiom(f);
    }
    let depth = (1..layers).fold("z".to_string(), |t, _| format!("s({t})"));
    w.goal(&format!("~reach({}, {depth})", node(layers - 1, path[layers - 1])));
    w.finish(name)
}

/// Edge chains over constants. The goal relates the two ends of the first
/// chain, whose nodes are sometimes compound terms, which makes the other
/// chains lighter distractors.
fn equivalence(rng: &mut ChaCha8Rng, name: String) -> Problem {
    let chains = rng.gen_range(2..=6);
    let compound = rng.gen_bool(0.5);
    let mut w = Writer::new(&format!("equivalence closure of {chains} chains"));
    w.axiom("r(X, X)");
    w.axiom("~r(X, Y) | r(Y, X)");
    w.axiom("~r(X, Y) | ~r(Y, Z) | r(X, Z)");
    let mut facts = Vec::new();
    let mut goal = String::new();
    for c in 0..chains {
        let len = if c == 0 {
            rng.gen_range(2..=6)
        } else {
            rng.gen_range(3..=8)
        };
        let node = |k: usize| {
            if c == 0 && compound {
                format!("k(e{k})")
            } else {
                format!("e{c}_{k}")
            }
        };
        for k in 0..len {
            if rng.gen_bool(0.5) {
                facts.push(format!("r({}, {})", node(k), node(k + 1)));
            } else {
                facts.push(format!("r({}, {})", node(k + 1), node(k)));
            }
        }
        if c == 0 {
            goal = format!("~r({}, {})", node(0), node(len));
        }
    }
    facts.shuffle(rng);
    for f in &facts {
        w.axiom(f);
    }
    w.goal(&goal);
    w.finish(name)
}

/// `holes + 1` pigeons, each in some hole, no two in the same one. There is
/// no distinguished goal clause.
fn pigeonhole(rng: &mut ChaCha8Rng, name: String) -> Problem {
    let holes = rng.gen_range(2..=4);
    let mut w = Writer::new(&format!("{} pigeons in {holes} holes", holes + 1));
    for p in 0..=holes {
        let lits: Vec<String> = (0..holes).map(|h| format!("in(p{p}, h{h})")).collect();
        w.axiom(&lits.join(" | "));
    }
    for h in 0..holes {
        for p in 0..=holes {
            for q in (p + 1)..=holes {
                w.axiom(&format!("~in(p{p}, h{h}) | ~in(p{q}, h{h})"));
            }
        }
    }
    w.finish(name)
}

/// `count` problems of `family`, named `{family}_{seed}_{k}`.
pub fn generate(family: Family, count: usize, seed: u64) -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ crate::features::fnv1a64(family.as_str().as_bytes()));
    (0..count)
        .map(|k| {
            let name = format!("{}_{seed}_{k:03}", family.as_str());
            match family {
                Family::Chain => chain(&mut rng, name),
                Family::Grid => grid(&mut rng, name),
                Family::Equivalence => equivalence(&mut rng, name),
                Family::Pigeonhole => pigeonhole(&mut rng, name),
            }
        })
        .collect()
}

/// A mixed corpus: families in fixed proportions, then shuffled.
pub fn generate_corpus(count: usize, seed: u64) -> Vec<Problem> {
    let weights = [
        (Family::Chain, 3),
        (Family::Grid, 3),
        (Family::Equivalence, 3),
        (Family::Pigeonhole, 1),
    ];
    let total: usize = weights.iter().map(|(_, w)| w).sum();
    let mut out = Vec::new();
    let mut left = count;
    for (k, (family, weight)) in weights.iter().enumerate() {
        let n = if k + 1 == weights.len() {
            left
        } else {
            count * weight / total
        };
        left -= n;
        out.extend(generate(*family, n, seed));
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Dev,
    Holdout,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Dev => "dev",
            SplitTag::Holdout => "holdout",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<Problem>,
    pub dev: Vec<Problem>,
    pub holdout: Vec<Problem>,
}

impl Split {
    pub fn get(&self, tag: SplitTag) -> &[Problem] {
        match tag {
            SplitTag::Train => &self.train,
            SplitTag::Dev => &self.dev,
            SplitTag::Holdout => &self.holdout,
        }
    }
}

/// Holdout problems that can be evaluated exactly once: `evaluate`
/// consumes the guard.
#[derive(Debug)]
pub struct Holdout {
    problems: Vec<Problem>,
}

impl Holdout {
    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn evaluate<T>(self, run: impl FnOnce(&[Problem]) -> T) -> T {
        log::info!("evaluating {} holdout problems", self.problems.len());
        run(&self.problems)
    }
}

impl Split {
    /// Train and dev problems, and the holdout behind its guard.
    pub fn guarded(self) -> (Vec<Problem>, Vec<Problem>, Holdout) {
        (self.train, self.dev, Holdout { problems: self.holdout })
    }
}

/// Seeded 90/5/5 split. Depends on the problem names only, not on their
/// order. Dev and holdout get at least one problem each when there are
/// three or more problems.
pub fn split(problems: &[Problem], seed: u64) -> Split {
    let mut order: Vec<usize> = (0..problems.len()).collect();
    order.sort_by(|&a, &b| problems[a].name.cmp(&problems[b].name));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = problems.len();
    let small = if n >= 3 { (n * 5 / 100).max(1) } else { 0 };
    let pick = |r: &[usize]| -> Vec<Problem> {
        let mut ids = r.to_vec();
        ids.sort_unstable_by(|&a, &b| problems[a].name.cmp(&problems[b].name));
        ids.into_iter().map(|k| problems[k].clone()).collect()
    };
    Split {
        dev: pick(&order[..small]),
        holdout: pick(&order[small..2 * small]),
        train: pick(&order[2 * small..]),
    }
}

/// Writes each problem to `dir/{name}.p`.
pub fn write_corpus(dir: &Path, problems: &[Problem]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in problems {
        std::fs::write(dir.join(format!("{}.p", p.name)), p.to_text())?;
    }
    Ok(())
}

/// Loads every `.p` file in `dir`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Problem>, crate::Error> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "p"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Problem::load(p)).collect()
}
