//! Clause featurization by hashed syntax-tree walks.
//!
//! Symbol names are anonymized to their arity (`p2` for a binary predicate,
//! `f0` for a constant, `*` for any variable). For every literal, each
//! top-down path starting at the literal's root and visiting at most
//! `walk_length` nodes becomes a feature string such as `+p1.f1.f0`, where
//! the root token carries the literal's polarity. Feature strings are hashed
//! into `base` buckets with 64-bit FNV-1a.
//!
//! When `count_features` is on, six counts follow the hashed block at indices
//! `base..base + 6`: clause length, positive literals, negative literals,
//! symbol occurrences, variable occurrences and term depth.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Clause, Literal, Term};

/// Number of trailing count features.
pub const COUNT_FEATURES: usize = 6;
/// Offset of the depth feature within the count block.
const DEPTH_SLOT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Hash dimensionality, a power of two.
    pub base: usize,
    pub walk_length: usize,
    pub count_features: bool,
}

impl Default for FeatureConfig {
    fn default() -> FeatureConfig {
        FeatureConfig {
            base: 1 << 15,
            walk_length: 3,
            count_features: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("feature base {0} is not a power of two >= 2")]
    BadBase(usize),
    #[error("walk length must be at least 1")]
    BadWalkLength,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.base < 2 || !self.base.is_power_of_two() {
            return Err(FeatureError::BadBase(self.base));
        }
        if self.walk_length == 0 {
            return Err(FeatureError::BadWalkLength);
        }
        Ok(())
    }

    /// Length of a clause vector under this configuration.
    pub fn dimension(&self) -> usize {
        self.base + if self.count_features { COUNT_FEATURES } else { 0 }
    }

    fn depth_index(&self) -> Option<usize> {
        self.count_features.then_some(self.base + DEPTH_SLOT)
    }
}

/// A fixed-dimension vector of non-negative counts, stored sparsely with
/// strictly increasing indices and no zero entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> SparseVector {
        SparseVector {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from arbitrary (index, value) pairs; duplicate indices
    /// are summed and zeros dropped. Panics on an index outside `dimension`.
    pub fn from_pairs(dimension: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> SparseVector {
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!(i < dimension, "index {i} out of range for dimension {dimension}");
            *map.entry(i as u32).or_insert(0.0) += v;
        }
        SparseVector {
            dimension,
            entries: map.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        }
    }

    pub fn from_dense(values: &[f64]) -> SparseVector {
        SparseVector::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&(index as u32), |(i, _)| *i) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for (i, v) in &self.entries {
            out[*i as usize] = *v;
        }
        out
    }

    /// `idx:count` pairs separated by spaces.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(i, v)| format!("{i}:{v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bucket of a feature string; `base` must be a power of two.
pub fn hash_feature(s: &str, base: usize) -> usize {
    debug_assert!(base.is_power_of_two());
    (fnv1a64(s.as_bytes()) & (base as u64 - 1)) as usize
}

/// Anonymized token of a term node: `p<k>` for predicates, `f<k>` for
/// functions and constants, `*` for variables.
pub fn anonymize(t: &Term, predicate: bool) -> String {
    match t {
        Term::Var(_) => "*".to_string(),
        Term::App(s, _) if predicate => format!("p{}", s.arity()),
        Term::App(s, _) => format!("f{}", s.arity()),
    }
}

/// All root-anchored walk strings of a literal, with repetitions.
pub fn literal_walks(l: &Literal, walk_length: usize) -> Vec<String> {
    let sign = if l.positive { "+" } else { "-" };
    let root = format!("{sign}{}", anonymize(&l.atom, true));
    let mut out = Vec::new();
    collect_walks(&l.atom, root, 1, walk_length, &mut out);
    out
}

fn collect_walks(t: &Term, prefix: String, len: usize, max: usize, out: &mut Vec<String>) {
    if len < max {
        if let Term::App(_, args) = t {
            for a in args.iter() {
                let walk = format!("{prefix}.{}", anonymize(a, false));
                collect_walks(a, walk, len + 1, max, out);
            }
        }
    }
    out.push(prefix);
}

pub fn featurize_clause(c: &Clause, cfg: &FeatureConfig) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for l in &c.literals {
        for w in literal_walks(l, cfg.walk_length) {
            *counts.entry(hash_feature(&w, cfg.base)).or_insert(0.0) += 1.0;
        }
    }
    if cfg.count_features {
        let pos = c.literals.iter().filter(|l| l.positive).count();
        let (syms, vars) = c.literals.iter().fold((0, 0), |(s, v), l| {
            let (s2, v2) = l.atom.size();
            (s + s2, v + v2)
        });
        let depth = c.literals.iter().map(|l| l.atom.depth()).max().unwrap_or(0);
        let tail = [c.len(), pos, c.len() - pos, syms, vars, depth];
        for (k, v) in tail.into_iter().enumerate() {
            counts.insert(cfg.base + k, v as f64);
        }
    }
    SparseVector::from_pairs(cfg.dimension(), counts)
}

/// How the feature vectors of two parent clauses are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// Elementwise sum; the depth count takes the maximum instead.
    Fuse,
    /// First parent at `[0, d)`, second at `[d, 2d)`.
    Cat,
}

impl PairMode {
    pub fn output_dimension(self, input: usize) -> usize {
        match self {
            PairMode::Fuse => input,
            PairMode::Cat => 2 * input,
        }
    }
}

impl std::str::FromStr for PairMode {
    type Err = String;
    fn from_str(s: &str) -> Result<PairMode, String> {
        match s {
            "fuse" => Ok(PairMode::Fuse),
            "cat" => Ok(PairMode::Cat),
            _ => Err(format!("unknown pair mode `{s}` (expected fuse or cat)")),
        }
    }
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairMode::Fuse => "fuse",
            PairMode::Cat => "cat",
        })
    }
}

/// Combines two parent vectors. `cfg` locates the depth slot for `Fuse`;
/// without count features every slot is summed.
pub fn pair_features(
    u: &SparseVector,
    v: &SparseVector,
    mode: PairMode,
    cfg: &FeatureConfig,
) -> Result<SparseVector, FeatureError> {
    if u.dimension != v.dimension {
        return Err(FeatureError::DimensionMismatch(u.dimension, v.dimension));
    }
    let d = u.dimension;
    Ok(match mode {
        PairMode::Fuse => {
            let depth = cfg.depth_index().filter(|i| *i < d);
            let mut out: BTreeMap<usize, f64> = BTreeMap::new();
            for (i, x) in u.entries.iter().chain(v.entries.iter()) {
                let slot = out.entry(*i as usize).or_insert(0.0);
                if Some(*i as usize) == depth {
                    *slot = slot.max(*x);
                } else {
                    *slot += x;
                }
            }
            SparseVector::from_pairs(d, out)
        }
        PairMode::Cat => SparseVector {
            dimension: 2 * d,
            entries: u
                .entries
                .iter()
                .copied()
                .chain(v.entries.iter().map(|(i, x)| (i + d as u32, *x)))
                .collect(),
        },
    })
}

/// One line of the sparse training format: `<label> <idx>:<count> ...`.
pub fn format_labeled(label: bool, v: &SparseVector) -> String {
    let mut s = String::from(if label { "1" } else { "0" });
    for (i, x) in &v.entries {
        s.push_str(&format!(" {i}:{x}"));
    }
    s
}

/// Parses one line of the sparse training format against `dimension`.
pub fn parse_labeled(line: &str, dimension: usize, line_no: usize) -> Result<(bool, SparseVector), FeatureError> {
    let bad = |message: String| FeatureError::Format { line: line_no, message };
    let mut parts = line.split_whitespace();
    let label = match parts.next() {
        Some("1") => true,
        Some("0") => false,
        Some(other) => return Err(bad(format!("label must be 0 or 1, found `{other}`"))),
        None => return Err(bad("empty line".into())),
    };
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for p in parts {
        let (i, x) = p
            .split_once(':')
            .ok_or_else(|| bad(format!("expected idx:count, found `{p}`")))?;
        let i: u32 = i.parse().map_err(|_| bad(format!("bad index `{i}`")))?;
        let x: f64 = x.parse().map_err(|_| bad(format!("bad count `{x}`")))?;
        if i as usize >= dimension {
            return Err(bad(format!("index {i} exceeds dimension {dimension}")));
        }
        if entries.last().is_some_and(|(j, _)| *j >= i) {
            return Err(bad("indices must be strictly increasing".into()));
        }
        if x < 0.0 || !x.is_finite() {
            return Err(bad(format!("count {x} is not a non-negative number")));
        }
        if x != 0.0 {
            entries.push((i, x));
        }
    }
    Ok((label, SparseVector { dimension, entries }))
}
