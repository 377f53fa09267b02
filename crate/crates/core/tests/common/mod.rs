//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use tandem::gbdt::{Node, Tree, TreeModel};
use tandem::problem::{parse_problem, Problem};

/// A ground clause over propositional atoms: `+k` is `a{k}`, `-k` is `~a{k}`.
pub type GroundClause = Vec<i32>;

pub fn ground_problem(name: &str, clauses: &[GroundClause]) -> Problem {
    let mut text = String::new();
    for (k, c) in clauses.iter().enumerate() {
        let lits: Vec<String> = if c.is_empty() {
            vec!["$false".into()]
        } else {
            c.iter()
                .map(|l| if *l > 0 { format!("a{l}") } else { format!("~a{}", -l) })
                .collect()
        };
        text.push_str(&format!("cnf(c{k}, axiom, {}).\n", lits.join(" | ")));
    }
    parse_problem(&text).unwrap().with_name(name)
}

/// Truth-table satisfiability for clauses over atoms `1..=atoms`.
pub fn satisfiable(clauses: &[GroundClause], atoms: u32) -> bool {
    (0u32..(1 << atoms)).any(|m| {
        clauses
            .iter()
            .all(|c| c.iter().any(|l| ((m >> (l.unsigned_abs() - 1)) & 1 == 1) == (*l > 0)))
    })
}

/// Independent ground given-clause loop with the baseline discipline:
/// lightest clause first (two per literal), FIFO among equals; resolvents
/// with each processed clause literal by literal in processing order;
/// tautologies, duplicates and clauses containing a processed unit are
/// dropped. Returns the number of processed clauses when the empty clause
/// appears, or `None` on saturation.
pub fn ground_baseline_processed(clauses: &[GroundClause]) -> Option<usize> {
    let mut all: Vec<GroundClause> = Vec::new();
    let mut seen: HashSet<Vec<i32>> = HashSet::new();
    let mut waiting: Vec<usize> = Vec::new();
    let mut processed: Vec<usize> = Vec::new();
    let mut units: HashSet<i32> = HashSet::new();

    let mut admit = |c: GroundClause,
                     all: &mut Vec<GroundClause>,
                     waiting: &mut Vec<usize>,
                     units: &HashSet<i32>|
     -> Option<bool> {
        let mut dedup: Vec<i32> = Vec::new();
        for l in c {
            if !dedup.contains(&l) {
                dedup.push(l);
            }
        }
        all.push(dedup.clone());
        if dedup.is_empty() {
            return Some(true);
        }
        let taut = dedup.iter().any(|l| dedup.contains(&-l));
        let mut key = dedup.clone();
        key.sort();
        if taut || dedup.iter().any(|l| units.contains(l)) || !seen.insert(key) {
            return Some(false);
        }
        waiting.push(all.len() - 1);
        None
    };

    for c in clauses {
        if admit(c.clone(), &mut all, &mut waiting, &units) == Some(true) {
            return Some(0);
        }
    }
    loop {
        let pick = waiting
            .iter()
            .enumerate()
            .min_by_key(|(_, &id)| (all[id].len(), id))
            .map(|(k, _)| k)?;
        let g = waiting.remove(pick);
        processed.push(g);
        if all[g].len() == 1 {
            units.insert(all[g][0]);
        }
        let given = all[g].clone();
        let mut children = Vec::new();
        for (i, &l) in given.iter().enumerate() {
            for &p in &processed {
                for (j, &m) in all[p].iter().enumerate() {
                    if m == -l {
                        let mut r: Vec<i32> = given
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k != i)
                            .map(|(_, x)| *x)
                            .collect();
                        r.extend(all[p].iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| *x));
                        children.push(r);
                    }
                }
            }
        }
        for c in children {
            if admit(c, &mut all, &mut waiting, &units) == Some(true) {
                return Some(processed.len());
            }
        }
    }
}

/// Breadth-first closure of a ground clause set under resolution; true if
/// the empty clause is derivable.
pub fn ground_refutable(clauses: &[GroundClause]) -> bool {
    let norm = |c: &[i32]| {
        let mut v = c.to_vec();
        v.sort();
        v.dedup();
        v
    };
    let mut known: HashSet<Vec<i32>> = clauses.iter().map(|c| norm(c)).collect();
    let mut frontier: VecDeque<Vec<i32>> = known.iter().cloned().collect();
    while let Some(c) = frontier.pop_front() {
        if c.is_empty() {
            return true;
        }
        let others: Vec<Vec<i32>> = known.iter().cloned().collect();
        for d in others {
            for &l in &c {
                if d.contains(&-l) {
                    let mut r: Vec<i32> = c.iter().copied().filter(|x| *x != l).collect();
                    r.extend(d.iter().copied().filter(|x| *x != -l));
                    let r = norm(&r);
                    if r.iter().any(|x| r.contains(&-x)) {
                        continue;
                    }
                    if known.insert(r.clone()) {
                        frontier.push_back(r);
                    }
                }
            }
        }
    }
    false
}

/// One split on `feature` at `threshold`: margin `lo` below, `hi` at or above.
pub fn stump(dimension: usize, feature: u32, threshold: f64, lo: f64, hi: f64) -> TreeModel {
    TreeModel {
        dimension,
        base_score: 0.0,
        trees: vec![Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf(lo),
                Node::Leaf(hi),
            ],
        }],
    }
}
