//! The given-clause loop with learned clause selection.
//!
//! Unprocessed clauses wait in two queues: a baseline queue ordered by
//! symbol weight and a learned queue ordered by model score. Depending on
//! the [`Mode`], clauses are scored by a local tree model, by a remote
//! evaluation server, or by both in two phases. With parental guidance,
//! resolvents whose parent pair scores below a threshold are frozen
//! instead of queued and come back only when the unprocessed set runs dry.

mod guidance;
mod queues;
mod solve;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureConfig, PairMode};
use crate::gbdt::{load_model, TreeModel};
use crate::logic::ClauseId;
use crate::problem::{DerivationTrace, ProofObject};

pub use guidance::{parental_filter, two_phase_evaluate, ParentalOutcome, TwoPhaseOutcome};
pub use queues::{QueueKind, Selection, Unprocessed};
pub use solve::{solve, solve_with, Prover};

/// Symbol weight of a function or predicate occurrence in the baseline queue.
pub const FUNCTION_WEIGHT: u64 = 2;
/// Symbol weight of a variable occurrence in the baseline queue.
pub const VARIABLE_WEIGHT: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Symbol weight with FIFO tie-break only.
    Baseline,
    /// Every new clause scored by the fast model.
    LocalModel,
    /// Every new clause scored by the evaluation server.
    ServerModel,
    /// Fast model first, server for the clauses above the threshold.
    TwoPhase,
    /// Parental filter; clauses scored by the fast model when one is given.
    Parental,
    /// Parental filter followed by two-phase evaluation.
    ThreePhase,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Baseline,
        Mode::LocalModel,
        Mode::ServerModel,
        Mode::TwoPhase,
        Mode::Parental,
        Mode::ThreePhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::LocalModel => "local-model",
            Mode::ServerModel => "server-model",
            Mode::TwoPhase => "two-phase",
            Mode::Parental => "parental",
            Mode::ThreePhase => "three-phase",
        }
    }

    pub fn uses_parental(self) -> bool {
        matches!(self, Mode::Parental | Mode::ThreePhase)
    }

    pub fn uses_server(self) -> bool {
        matches!(self, Mode::ServerModel | Mode::TwoPhase | Mode::ThreePhase)
    }

    pub fn needs_fast_model(self) -> bool {
        matches!(self, Mode::LocalModel | Mode::TwoPhase | Mode::ThreePhase)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub mode: Mode,
    /// Clause model used locally and as the first phase.
    pub fast_model: Option<PathBuf>,
    /// Pair model used by the parental filter.
    pub parental_model: Option<PathBuf>,
    /// `host:port` of the evaluation server.
    pub server: Option<String>,
    pub two_phase_threshold: f64,
    pub parental_threshold: f64,
    pub pair_mode: PairMode,
    pub query_cap: usize,
    pub context_cap: usize,
    pub penalty_weight: f64,
    pub coop: bool,
    pub features: FeatureConfig,
}

impl Default for GuidanceConfig {
    fn default() -> GuidanceConfig {
        GuidanceConfig {
            mode: Mode::Baseline,
            fast_model: None,
            parental_model: None,
            server: None,
            two_phase_threshold: 0.1,
            parental_threshold: 0.1,
            pair_mode: PairMode::Cat,
            query_cap: 256,
            context_cap: 768,
            penalty_weight: 1e8,
            coop: false,
            features: FeatureConfig::default(),
        }
    }
}

impl GuidanceConfig {
    pub fn from_toml(text: &str) -> Result<GuidanceConfig, crate::Error> {
        toml::from_str(text).map_err(|e| crate::Error::Invalid(format!("bad guidance config: {e}")))
    }

    pub fn with_mode(mode: Mode) -> GuidanceConfig {
        GuidanceConfig {
            mode,
            ..GuidanceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProverError> {
        for (name, t) in [
            ("two_phase_threshold", self.two_phase_threshold),
            ("parental_threshold", self.parental_threshold),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(ProverError::Config(format!("{name} must lie in [0, 1], got {t}")));
            }
        }
        if self.query_cap == 0 {
            return Err(ProverError::Config("query_cap must be at least 1".into()));
        }
        if !(self.penalty_weight.is_finite() && self.penalty_weight > 0.0) {
            return Err(ProverError::Config("penalty_weight must be a positive number".into()));
        }
        self.features.validate().map_err(|e| ProverError::Config(e.to_string()))
    }
}

/// Resource limits for one run. `None` means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_processed: Option<usize>,
    pub max_generated: Option<usize>,
    pub wall_seconds: Option<f64>,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            max_processed: None,
            max_generated: Some(50_000),
            wall_seconds: None,
        }
    }
}

impl Limits {
    pub fn unlimited() -> Limits {
        Limits {
            max_processed: None,
            max_generated: None,
            wall_seconds: None,
        }
    }

    pub fn processed(n: usize) -> Limits {
        Limits {
            max_processed: Some(n),
            ..Limits::unlimited()
        }
    }
}

/// Models loaded once and shared by many runs.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub fast: Option<Arc<TreeModel>>,
    pub parental: Option<Arc<TreeModel>>,
}

impl Models {
    /// Loads the model files named in `cfg`.
    pub fn load(cfg: &GuidanceConfig) -> Result<Models, crate::Error> {
        let read = |p: &Option<PathBuf>| -> Result<Option<Arc<TreeModel>>, crate::Error> {
            match p {
                None => Ok(None),
                Some(path) => Ok(Some(Arc::new(load_model(&std::fs::read(path)?)?))),
            }
        };
        Ok(Models {
            fast: read(&cfg.fast_model)?,
            parental: read(&cfg.parental_model)?,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProverError {
    #[error("mode {mode} needs a {what}")]
    Missing { mode: Mode, what: &'static str },
    #[error("{which} model expects dimension {found}, features give {expected}")]
    Dimension {
        which: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid guidance configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Unsat(ProofObject),
    Saturated,
    ResourceOut,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Unsat(_) => "unsat",
            Status::Saturated => "saturated",
            Status::ResourceOut => "resource-out",
        }
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Status::Unsat(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Clauses produced by inferences, inputs excluded.
    pub generated: usize,
    pub processed: usize,
    /// Tautologies, duplicates and unit-subsumed clauses.
    pub discarded: usize,
    pub frozen: usize,
    pub revived: usize,
    /// Clauses given the penalty weight by the first phase.
    pub penalized: usize,
    pub fast_calls: usize,
    pub parental_calls: usize,
    pub server_calls: usize,
    pub server_failures: usize,
    /// Set once a server failure sent the run back to the baseline queue.
    pub degraded: bool,
    pub seconds: f64,
    pub server_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub trace: DerivationTrace,
    pub stats: SolveStats,
    /// Given clauses in the order they were selected.
    pub processed_order: Vec<ClauseId>,
}
