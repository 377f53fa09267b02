//! Gradient-boosted regression trees for binary classification.
//!
//! Trees are grown best-first with exact greedy split search over the
//! feature values present in a node (absent sparse entries read as 0).
//! Leaf values take one Newton step on the logistic loss, scaled by the
//! learning rate and halved until the leaf's training loss does not
//! increase.

mod io;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::SparseVector;

pub use io::{load_model, read_dataset, save_model, write_dataset, ModelError, MODEL_MAGIC, MODEL_VERSION};
pub use train::train;

/// Logits are clamped to this magnitude so scores stay strictly inside (0, 1).
pub const MAX_LOGIT: f64 = 35.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub trees: usize,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// L2 regularisation on leaf values.
    pub l2: f64,
    /// Fraction of rows sampled (without replacement) for each tree.
    pub subsample: f64,
    /// Initial logit; the log-odds of the positive rate when absent.
    pub base_score: Option<f64>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> TreeParams {
        TreeParams {
            trees: 50,
            max_depth: 8,
            max_leaves: 32,
            learning_rate: 0.2,
            min_samples_leaf: 2,
            l2: 1.0,
            subsample: 1.0,
            base_score: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("training data is empty")]
    Empty,
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// A training example.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub label: bool,
    pub vector: SparseVector,
    /// Name of the problem the example was taken from.
    pub problem: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] >= threshold` go right.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Node 0 is the root; children always come after their parent.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, v: &SparseVector) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(x) => return x,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if v.get(feature as usize) >= threshold {
                        right as usize
                    } else {
                        left as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left as usize).max(go(t, right as usize)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    fn features(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf(_) => None,
        })
    }
}

/// A boosted ensemble. Immutable once built, so it can be shared across
/// threads for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub dimension: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Negative log-likelihood of `label` under logit `margin`.
pub fn log_loss(margin: f64, label: bool) -> f64 {
    // log(1 + e^-m) for positives, log(1 + e^m) for negatives, computed stably
    let m = if label { margin } else { -margin };
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

impl TreeModel {
    /// A model with no trees, scoring `sigmoid(base_score)` everywhere.
    pub fn constant(dimension: usize, base_score: f64) -> TreeModel {
        TreeModel {
            dimension,
            base_score,
            trees: Vec::new(),
        }
    }

    /// Raw logit before the sigmoid.
    pub fn margin(&self, v: &SparseVector) -> f64 {
        self.trees.iter().fold(self.base_score, |acc, t| acc + t.leaf_value(v))
    }

    /// Probability-like score in (0, 1).
    pub fn score(&self, v: &SparseVector) -> f64 {
        sigmoid(self.margin(v).clamp(-MAX_LOGIT, MAX_LOGIT))
    }

    pub fn score_all(&self, vs: &[SparseVector]) -> Vec<f64> {
        vs.iter().map(|v| self.score(v)).collect()
    }

    /// Feature indices tested by at least one split, ascending.
    pub fn used_features(&self) -> Vec<u32> {
        let mut fs: Vec<u32> = self.trees.iter().flat_map(|t| t.features()).collect();
        fs.sort_unstable();
        fs.dedup();
        fs
    }

    /// Mean logistic loss over `data`.
    pub fn mean_loss(&self, data: &[LabeledVector]) -> f64 {
        let total: f64 = data.iter().map(|d| log_loss(self.margin(&d.vector), d.label)).sum();
        total / data.len().max(1) as f64
    }

    /// Fraction of examples classified correctly at the 0.5 cut-off.
    pub fn accuracy(&self, data: &[LabeledVector]) -> f64 {
        let right = data.iter().filter(|d| (self.score(&d.vector) > 0.5) == d.label).count();
        right as f64 / data.len().max(1) as f64
    }

    /// Human-readable dump, one node per line.
    pub fn dump_text(&self) -> String {
        let mut out = format!(
            "model dimension={} base_score={} trees={}\n",
            self.dimension,
            self.base_score,
            self.trees.len()
        );
        for (k, t) in self.trees.iter().enumerate() {
            out.push_str(&format!("tree {k}\n"));
            for (i, n) in t.nodes.iter().enumerate() {
                match n {
                    Node::Leaf(x) => out.push_str(&format!("  {i}: leaf {x}\n")),
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => out.push_str(&format!("  {i}: x[{feature}] >= {threshold} ? {right} : {left}\n")),
                }
            }
        }
        out
    }
}
