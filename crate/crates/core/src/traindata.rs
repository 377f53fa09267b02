//! Training examples from derivation traces.
//!
//! Clause examples label the processed clauses of a successful run:
//! positive when they occur in the proof, negative otherwise. Parental
//! examples label parent pairs of resolvents, either by proof membership of
//! a child or by whether a child was ever selected.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{featurize_clause, fnv1a64, pair_features, FeatureConfig, PairMode, SparseVector};
use crate::gbdt::LabeledVector;
use crate::logic::{ClauseId, Rule};
use crate::problem::DerivationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelScheme {
    /// Processed clauses; positive if in the proof.
    ProofClauses,
    /// Parent pairs; positive if some child is in the proof.
    ProofParents,
    /// Parent pairs; positive if some child was processed.
    GivenParents,
}

impl LabelScheme {
    pub fn is_parental(self) -> bool {
        !matches!(self, LabelScheme::ProofClauses)
    }
}

impl std::str::FromStr for LabelScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<LabelScheme, String> {
        match s {
            "proof-clauses" => Ok(LabelScheme::ProofClauses),
            "proof-parents" => Ok(LabelScheme::ProofParents),
            "given-parents" => Ok(LabelScheme::GivenParents),
            _ => Err(format!("unknown label scheme `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Negatives kept per positive within each problem; `None` keeps all.
    pub rho: Option<usize>,
    pub seed: u64,
}

/// One parent pair of one problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    /// Parents in generation order (given clause first).
    pub parents: (ClauseId, ClauseId),
    pub label: bool,
    /// The pair produced both positive and negative children.
    pub mixed: bool,
    pub problem: String,
}

/// Anything with a label and a problem, so sampling works on both kinds of
/// example.
pub trait Example {
    fn label(&self) -> bool;
    fn problem(&self) -> &str;
}

impl Example for PairRecord {
    fn label(&self) -> bool {
        self.label
    }
    fn problem(&self) -> &str {
        &self.problem
    }
}

impl Example for LabeledVector {
    fn label(&self) -> bool {
        self.label
    }
    fn problem(&self) -> &str {
        &self.problem
    }
}

fn has_proof(trace: &DerivationTrace) -> bool {
    trace.records.iter().any(|r| r.in_proof && r.is_empty_clause())
}

/// Processed clauses of a successful run, labelled by proof membership.
/// Returns nothing for a trace without a proof.
pub fn label_clause_data(trace: &DerivationTrace, features: &FeatureConfig, problem: &str) -> Vec<LabeledVector> {
    if !has_proof(trace) {
        log::warn!("{problem}: trace has no proof, no clause examples");
        return Vec::new();
    }
    trace
        .records
        .iter()
        .filter(|r| r.processed)
        .map(|r| LabeledVector {
            label: r.in_proof,
            vector: featurize_clause(&r.clause(), features),
            problem: problem.to_string(),
        })
        .collect()
}

/// One record per unordered parent pair of the resolvents in `trace`.
/// Under `ProofParents` a trace without a proof yields nothing.
pub fn label_parental_data(trace: &DerivationTrace, scheme: LabelScheme, problem: &str) -> Vec<PairRecord> {
    let good: fn(&crate::problem::TraceRecord) -> bool = match scheme {
        LabelScheme::ProofParents => |r| r.in_proof,
        // the empty clause ends the search before it could be selected
        LabelScheme::GivenParents => |r| r.processed || r.is_empty_clause(),
        LabelScheme::ProofClauses => panic!("label_parental_data needs a parental scheme"),
    };
    if scheme == LabelScheme::ProofParents && !has_proof(trace) {
        return Vec::new();
    }
    let mut order: Vec<(ClauseId, ClauseId)> = Vec::new();
    // (any positive child, any negative child) per unordered pair
    let mut seen: HashMap<(ClauseId, ClauseId), (bool, bool)> = HashMap::new();
    let mut first: HashMap<(ClauseId, ClauseId), (ClauseId, ClauseId)> = HashMap::new();
    for r in &trace.records {
        if r.rule != Rule::Resolution {
            continue;
        }
        let (a, b) = (r.parents[0], r.parents[1]);
        let key = (a.min(b), a.max(b));
        let entry = seen.entry(key).or_insert_with(|| {
            order.push(key);
            first.insert(key, (a, b));
            (false, false)
        });
        if good(r) {
            entry.0 = true;
        } else {
            entry.1 = true;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (pos, neg) = seen[&key];
            PairRecord {
                parents: first[&key],
                label: pos,
                mixed: pos && neg,
                problem: problem.to_string(),
            }
        })
        .collect()
}

/// Keeps every positive and, per problem, a uniform sample of at most
/// `rho` times as many negatives. The input order is preserved.
pub fn sample_negatives<T: Example + Clone>(records: &[T], cfg: &SamplingConfig) -> Vec<T> {
    let Some(rho) = cfg.rho else {
        return records.to_vec();
    };
    let mut by_problem: BTreeMap<&str, (usize, Vec<usize>)> = BTreeMap::new();
    for (k, r) in records.iter().enumerate() {
        let e = by_problem.entry(r.problem()).or_default();
        if r.label() {
            e.0 += 1;
        } else {
            e.1.push(k);
        }
    }
    let mut keep = vec![true; records.len()];
    for (problem, (pos, negs)) in by_problem {
        let quota = (rho * pos).min(negs.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a64(problem.as_bytes()));
        let chosen = sample(&mut rng, negs.len(), quota);
        let mut wanted = vec![false; negs.len()];
        for i in chosen {
            wanted[i] = true;
        }
        for (i, &k) in negs.iter().enumerate() {
            keep[k] = wanted[i];
        }
    }
    records
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(r, _)| r.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pos: usize,
    pub neg: usize,
    pub mixed: usize,
}

impl Counts {
    fn add(&mut self, label: bool, mixed: bool) {
        if label {
            self.pos += 1;
        } else {
            self.neg += 1;
        }
        self.mixed += mixed as usize;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    #[serde(flatten)]
    pub total: Counts,
    pub per_problem: BTreeMap<String, Counts>,
}

impl DatasetStats {
    fn add(&mut self, problem: &str, label: bool, mixed: bool) {
        self.total.add(label, mixed);
        self.per_problem
            .entry(problem.to_string())
            .or_default()
            .add(label, mixed);
    }

    /// Negatives per positive; infinite when there are no positives.
    pub fn ratio(&self) -> f64 {
        self.total.neg as f64 / self.total.pos as f64
    }
}

/// A labelled, vectorised dataset with its statistics.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub examples: Vec<LabeledVector>,
    pub stats: DatasetStats,
    /// Vector length: the clause dimension, or the pair dimension.
    pub dimension: usize,
}

/// Labels, samples and vectorises `traces`, given as (problem, trace).
pub fn emit_dataset(
    traces: &[(String, DerivationTrace)],
    scheme: LabelScheme,
    pair_mode: PairMode,
    features: &FeatureConfig,
    sampling: &SamplingConfig,
) -> Result<Dataset, crate::Error> {
    features.validate()?;
    let mut out = Dataset {
        dimension: match scheme {
            LabelScheme::ProofClauses => features.dimension(),
            _ => pair_mode.output_dimension(features.dimension()),
        },
        ..Dataset::default()
    };
    for (problem, trace) in traces {
        if scheme == LabelScheme::ProofClauses {
            let data = sample_negatives(&label_clause_data(trace, features, problem), sampling);
            for d in &data {
                out.stats.add(problem, d.label, false);
            }
            out.examples.extend(data);
            continue;
        }
        let records = sample_negatives(&label_parental_data(trace, scheme, problem), sampling);
        let mut vectors: HashMap<ClauseId, SparseVector> = HashMap::new();
        let mut vector_of = |id: ClauseId| -> Result<SparseVector, crate::Error> {
            if let Some(v) = vectors.get(&id) {
                return Ok(v.clone());
            }
            let r = trace
                .get(id)
                .ok_or_else(|| crate::Error::Invalid(format!("{problem}: trace has no clause {}", id.0)))?;
            let v = featurize_clause(&r.clause(), features);
            vectors.insert(id, v.clone());
            Ok(v)
        };
        for rec in records {
            let u = vector_of(rec.parents.0)?;
            let v = vector_of(rec.parents.1)?;
            out.stats.add(problem, rec.label, rec.mixed);
            out.examples.push(LabeledVector {
                label: rec.label,
                vector: pair_features(&u, &v, pair_mode, features)?,
                problem: problem.clone(),
            });
        }
    }
    Ok(out)
}
