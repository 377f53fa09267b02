use std::collections::HashMap;

use crate::features::{pair_features, FeatureConfig, PairMode, SparseVector};
use crate::gbdt::TreeModel;
use crate::logic::{Clause, ClauseId, Rule};

#[derive(Debug, Default)]
pub struct ParentalOutcome {
    pub pass: Vec<Clause>,
    pub freeze: Vec<Clause>,
    /// Number of pair evaluations, one per distinct parent pair.
    pub model_calls: usize,
}

/// Splits freshly generated clauses into those that pass the parental model
/// and those to freeze. Only resolvents are judged; factors and inputs
/// always pass. The pair vector is built from `(first parent, second
/// parent)` in generation order, which in the prover is (given, partner).
pub fn parental_filter(
    children: Vec<Clause>,
    model: &TreeModel,
    threshold: f64,
    pair_mode: PairMode,
    features: &FeatureConfig,
    parent_vector: &mut dyn FnMut(ClauseId) -> SparseVector,
) -> ParentalOutcome {
    let mut out = ParentalOutcome::default();
    let mut cache: HashMap<(ClauseId, ClauseId), f64> = HashMap::new();
    for child in children {
        if child.rule != Rule::Resolution {
            out.pass.push(child);
            continue;
        }
        let key = (child.parents[0], child.parents[1]);
        let score = *cache.entry(key).or_insert_with(|| {
            out.model_calls += 1;
            let u = parent_vector(key.0);
            let v = parent_vector(key.1);
            let pair =
                pair_features(&u, &v, pair_mode, features).expect("parent vectors share one feature configuration");
            model.score(&pair)
        });
        if score < threshold {
            out.freeze.push(child);
        } else {
            out.pass.push(child);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseOutcome {
    /// Learned-queue key per clause, lower first: the negated score, or the
    /// penalty weight.
    pub keys: Vec<f64>,
    pub penalized: usize,
    pub server_calls: usize,
    /// True if a remote call failed and the remaining survivors kept their
    /// fast scores.
    pub fell_back: bool,
}

/// Scores `vectors` with the fast model, gives the penalty weight to every
/// clause scoring at most `threshold`, and sends the survivors to `remote`
/// in chunks of at most `query_cap`.
pub fn two_phase_evaluate<E>(
    vectors: &[SparseVector],
    fast: &TreeModel,
    threshold: f64,
    penalty_weight: f64,
    query_cap: usize,
    remote: &mut dyn FnMut(&[SparseVector]) -> Result<Vec<f64>, E>,
) -> TwoPhaseOutcome {
    let fast_scores = fast.score_all(vectors);
    let mut keys = vec![penalty_weight; vectors.len()];
    let survivors: Vec<usize> = (0..vectors.len()).filter(|&k| fast_scores[k] > threshold).collect();
    let mut out = TwoPhaseOutcome {
        keys: Vec::new(),
        penalized: vectors.len() - survivors.len(),
        server_calls: 0,
        fell_back: false,
    };
    for chunk in survivors.chunks(query_cap.max(1)) {
        let scores = if out.fell_back {
            None
        } else {
            let batch: Vec<SparseVector> = chunk.iter().map(|&k| vectors[k].clone()).collect();
            out.server_calls += 1;
            match remote(&batch) {
                Ok(s) if s.len() == chunk.len() => Some(s),
                _ => {
                    out.fell_back = true;
                    None
                }
            }
        };
        for (n, &k) in chunk.iter().enumerate() {
            keys[k] = -scores.as_ref().map_or(fast_scores[k], |s| s[n]);
        }
    }
    out.keys = keys;
    out
}
