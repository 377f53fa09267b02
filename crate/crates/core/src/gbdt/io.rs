//! Binary model files and sparse text datasets.
//!
//! Model layout (all little-endian):
//!
//! ```text
//! magic "TGBM" | version u32 | dimension u64 | base_score f64 | tree count u32
//! per tree: node count u32, then per node
//!   0u8 leaf_value f64
//!   1u8 feature u32 threshold f64 left u32 right u32
//! ```

use thiserror::Error;

use super::{LabeledVector, Node, Tree, TreeModel};
use crate::features::{format_labeled, parse_labeled, FeatureError};

pub const MODEL_MAGIC: &[u8; 4] = b"TGBM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model file truncated")]
    Truncated,
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub fn save_model(model: &TreeModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dimension as u64).to_le_bytes());
    out.extend_from_slice(&model.base_score.to_le_bytes());
    out.extend_from_slice(&(model.trees.len() as u32).to_le_bytes());
    for t in &model.trees {
        out.extend_from_slice(&(t.nodes.len() as u32).to_le_bytes());
        for n in &t.nodes {
            match *n {
                Node::Leaf(x) => {
                    out.push(0);
                    out.extend_from_slice(&x.to_le_bytes());
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(1);
                    out.extend_from_slice(&feature.to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        let end = self.at.checked_add(N).ok_or(ModelError::Truncated)?;
        let slice = self.bytes.get(self.at..end).ok_or(ModelError::Truncated)?;
        self.at = end;
        Ok(slice.try_into().expect("slice has length N"))
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn load_model(bytes: &[u8]) -> Result<TreeModel, ModelError> {
    let mut r = Reader { bytes, at: 0 };
    if bytes.len() < 4 {
        return Err(ModelError::Truncated);
    }
    if &r.take::<4>()? != MODEL_MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let dimension = r.u64()? as usize;
    let base_score = r.f64()?;
    let n_trees = r.u32()?;
    let mut trees = Vec::new();
    for t in 0..n_trees {
        let n_nodes = r.u32()?;
        if n_nodes == 0 {
            return Err(ModelError::Invalid(format!("tree {t} has no nodes")));
        }
        let mut nodes = Vec::new();
        for i in 0..n_nodes {
            let node = match r.u8()? {
                0 => Node::Leaf(r.f64()?),
                1 => {
                    let feature = r.u32()?;
                    let threshold = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    if feature as usize >= dimension {
                        return Err(ModelError::Invalid(format!(
                            "tree {t} node {i}: feature {feature} out of range"
                        )));
                    }
                    if left <= i || right <= i || left >= n_nodes || right >= n_nodes {
                        return Err(ModelError::Invalid(format!("tree {t} node {i}: bad child index")));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                tag => return Err(ModelError::Invalid(format!("tree {t} node {i}: unknown tag {tag}"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if r.at != bytes.len() {
        return Err(ModelError::Invalid("trailing bytes after last tree".into()));
    }
    Ok(TreeModel {
        dimension,
        base_score,
        trees,
    })
}

/// Writes examples in the sparse text format, one per line.
pub fn write_dataset(data: &[LabeledVector]) -> String {
    let mut out = String::new();
    for d in data {
        out.push_str(&format_labeled(d.label, &d.vector));
        out.push('\n');
    }
    out
}

/// Reads the sparse text format. Every vector gets `dimension`; `problem`
/// is recorded on each example.
pub fn read_dataset(text: &str, dimension: usize, problem: &str) -> Result<Vec<LabeledVector>, FeatureError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            parse_labeled(l, dimension, n + 1).map(|(label, vector)| LabeledVector {
                label,
                vector,
                problem: problem.to_string(),
            })
        })
        .collect()
}
