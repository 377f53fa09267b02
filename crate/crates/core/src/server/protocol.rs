//! Line-delimited JSON messages exchanged with the evaluation server.
//!
//! ```text
//! {"id":"7","query":[[[3,1.0],[17,2.0]],[[5,1.0]]],"context":[12,40]}
//! {"id":"7","scores":[0.81,0.12]}
//! {"id":"8","error":{"code":"bad_request","message":"..."}}
//! ```

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub id: String,
    /// One sparse vector per clause, as `[index, count]` pairs.
    pub query: Vec<Vec<(u32, f64)>>,
    /// Ids of already selected clauses. Tree models ignore them.
    #[serde(default)]
    pub context: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_cap: Option<usize>,
}

impl EvalRequest {
    pub fn new(id: impl Into<String>, vectors: &[SparseVector], context: Vec<u64>) -> EvalRequest {
        EvalRequest {
            id: id.into(),
            query: vectors.iter().map(|v| v.entries().to_vec()).collect(),
            context,
            query_cap: None,
            context_cap: None,
        }
    }

    pub fn is_ping(&self) -> bool {
        self.query.is_empty()
    }

    /// Rebuilds the query vectors at `dimension`, rejecting out-of-range or
    /// unsorted indices and negative counts.
    pub fn vectors(&self, dimension: usize) -> Result<Vec<SparseVector>, String> {
        self.query
            .iter()
            .enumerate()
            .map(|(k, pairs)| {
                let mut last: Option<u32> = None;
                for (i, x) in pairs {
                    if *i as usize >= dimension {
                        return Err(format!("query[{k}]: index {i} exceeds dimension {dimension}"));
                    }
                    if last.is_some_and(|l| l >= *i) {
                        return Err(format!("query[{k}]: indices must be strictly increasing"));
                    }
                    if !(x.is_finite() && *x >= 0.0) {
                        return Err(format!("query[{k}]: count {x} is not a non-negative number"));
                    }
                    last = Some(*i);
                }
                Ok(SparseVector::from_pairs(
                    dimension,
                    pairs.iter().map(|(i, x)| (*i as usize, *x)),
                ))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

impl EvalResponse {
    pub fn scores(id: impl Into<String>, scores: Vec<f64>) -> EvalResponse {
        EvalResponse {
            id: id.into(),
            scores: Some(scores),
            error: None,
        }
    }

    pub fn error(id: impl Into<String>, code: &str, message: impl Into<String>) -> EvalResponse {
        EvalResponse {
            id: id.into(),
            scores: None,
            error: Some(ErrorRecord {
                code: code.to_string(),
                message: message.into(),
            }),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("responses always serialize");
        s.push('\n');
        s
    }
}

pub const BAD_REQUEST: &str = "bad_request";
pub const BAD_VECTOR: &str = "bad_vector";
