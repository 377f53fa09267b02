//! Turning benchmark traces into models.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::{FeatureConfig, PairMode};
use crate::gbdt::{save_model, train, TrainError, TreeModel, TreeParams};
use crate::problem::DerivationTrace;
use crate::traindata::{emit_dataset, DatasetStats, LabelScheme, SamplingConfig};

/// How the three kinds of model are trained from traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Clause model used in the prover.
    pub clause: TreeParams,
    /// Larger clause model served remotely.
    pub slow: TreeParams,
    pub parental: TreeParams,
    /// Negatives kept per positive, per problem. `None` keeps all.
    pub clause_rho: Option<usize>,
    pub parental_rho: Option<usize>,
    pub parental_scheme: LabelScheme,
    pub pair_mode: PairMode,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> TrainingConfig {
        TrainingConfig {
            clause: TreeParams {
                trees: 30,
                max_leaves: 16,
                ..TreeParams::default()
            },
            slow: TreeParams {
                trees: 80,
                max_leaves: 32,
                ..TreeParams::default()
            },
            parental: TreeParams {
                trees: 30,
                max_leaves: 16,
                ..TreeParams::default()
            },
            clause_rho: None,
            parental_rho: Some(8),
            parental_scheme: LabelScheme::ProofParents,
            pair_mode: PairMode::Cat,
            seed: 0,
        }
    }
}

/// Which models to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Wanted {
    pub fast: bool,
    pub slow: bool,
    pub parental: bool,
}

impl Wanted {
    pub const ALL: Wanted = Wanted {
        fast: true,
        slow: true,
        parental: true,
    };
}

#[derive(Debug, Clone, Default)]
pub struct TrainedModels {
    pub fast: Option<TreeModel>,
    pub slow: Option<TreeModel>,
    pub parental: Option<TreeModel>,
    pub clause_stats: Option<DatasetStats>,
    pub pair_stats: Option<DatasetStats>,
}

/// Paths of saved models; `None` for models that were not trained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelFiles {
    pub fast: Option<PathBuf>,
    pub slow: Option<PathBuf>,
    pub parental: Option<PathBuf>,
}

impl TrainedModels {
    /// Writes `fast.model`, `slow.model` and `parental.model` under `dir`.
    pub fn save(&self, dir: &Path) -> std::io::Result<ModelFiles> {
        std::fs::create_dir_all(dir)?;
        let put = |m: &Option<TreeModel>, name: &str| -> std::io::Result<Option<PathBuf>> {
            match m {
                None => Ok(None),
                Some(m) => {
                    let path = dir.join(name);
                    std::fs::write(&path, save_model(m))?;
                    Ok(Some(path))
                }
            }
        };
        Ok(ModelFiles {
            fast: put(&self.fast, "fast.model")?,
            slow: put(&self.slow, "slow.model")?,
            parental: put(&self.parental, "parental.model")?,
        })
    }
}

/// Trains the wanted models. Both clause models share the clause data set.
/// Fails with an empty-data error when no trace contains a proof.
pub fn train_models(
    traces: &[(String, DerivationTrace)],
    cfg: &TrainingConfig,
    features: &FeatureConfig,
    wanted: Wanted,
) -> Result<TrainedModels, crate::Error> {
    let mut out = TrainedModels::default();
    if wanted.fast || wanted.slow {
        let sampling = SamplingConfig {
            rho: cfg.clause_rho,
            seed: cfg.seed,
        };
        let data = emit_dataset(traces, LabelScheme::ProofClauses, cfg.pair_mode, features, &sampling)?;
        if data.stats.total.pos == 0 {
            return Err(TrainError::Empty.into());
        }
        log::info!(
            "clause data: {} positive, {} negative",
            data.stats.total.pos,
            data.stats.total.neg
        );
        if wanted.fast {
            out.fast = Some(train(&data.examples, &cfg.clause)?);
        }
        if wanted.slow {
            out.slow = Some(train(&data.examples, &cfg.slow)?);
        }
        out.clause_stats = Some(data.stats);
    }
    if wanted.parental {
        let sampling = SamplingConfig {
            rho: cfg.parental_rho,
            seed: cfg.seed,
        };
        let data = emit_dataset(traces, cfg.parental_scheme, cfg.pair_mode, features, &sampling)?;
        if data.stats.total.pos == 0 {
            return Err(TrainError::Empty.into());
        }
        log::info!(
            "pair data: {} positive, {} negative, {} mixed",
            data.stats.total.pos,
            data.stats.total.neg,
            data.stats.total.mixed
        );
        out.parental = Some(train(&data.examples, &cfg.parental)?);
        out.pair_stats = Some(data.stats);
    }
    Ok(out)
}
