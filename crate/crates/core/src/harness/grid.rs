//! Grid search over guidance and training parameters.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bench::{append_records, run_problems, ProblemRecord, ProblemSource, ResultRow, ResultTable};
use super::corpus::SplitTag;
use super::training::{train_models, TrainingConfig, Wanted};
use crate::features::PairMode;
use crate::problem::{read_trace, DerivationTrace, Problem};
use crate::prover::{GuidanceConfig, Limits, Mode, Models};
use crate::server::{start_from_file, ServerConfig};

/// Value lists to combine. An empty list leaves the base value alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridAxes {
    pub mode: Vec<Mode>,
    pub coop: Vec<bool>,
    pub two_phase_threshold: Vec<f64>,
    pub parental_threshold: Vec<f64>,
    pub query_cap: Vec<usize>,
    pub context_cap: Vec<usize>,
    pub pair_mode: Vec<PairMode>,
    /// The remaining axes retrain models and need a `training` section.
    pub rho: Vec<usize>,
    pub trees: Vec<usize>,
    pub max_leaves: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl GridAxes {
    fn lens(&self) -> [usize; 11] {
        [
            self.mode.len(),
            self.coop.len(),
            self.two_phase_threshold.len(),
            self.parental_threshold.len(),
            self.query_cap.len(),
            self.context_cap.len(),
            self.pair_mode.len(),
            self.rho.len(),
            self.trees.len(),
            self.max_leaves.len(),
            self.learning_rate.len(),
        ]
    }

    /// Number of combinations.
    pub fn size(&self) -> usize {
        self.lens().iter().map(|&n| n.max(1)).product()
    }

    fn retrains(&self) -> bool {
        !(self.rho.is_empty() && self.trees.is_empty() && self.max_leaves.is_empty() && self.learning_rate.is_empty())
    }
}

/// Traces to retrain from, and the parameters the training axes modify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTraining {
    /// Directory of `.trace` files, one per problem.
    pub traces: PathBuf,
    #[serde(default)]
    pub config: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub name: String,
    pub problems: ProblemSource,
    #[serde(default)]
    pub base: GuidanceConfig,
    pub axes: GridAxes,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "one")]
    pub parallel: usize,
    #[serde(default = "default_cap")]
    pub max_configs: usize,
    pub output: Option<PathBuf>,
    pub server: Option<ServerConfig>,
    pub training: Option<GridTraining>,
}

fn one() -> usize {
    1
}

fn default_cap() -> usize {
    64
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<GridSpec, crate::Error> {
        toml::from_str(text).map_err(|e| crate::Error::Invalid(format!("bad grid spec: {e}")))
    }

    pub fn validate(&self) -> Result<(), crate::Error> {
        let bad = |m: String| Err(crate::Error::Invalid(m));
        if self.axes.lens().iter().all(|&n| n == 0) {
            return bad("the grid has no axes".into());
        }
        if self.axes.size() > self.max_configs {
            return bad(format!(
                "the grid has {} configurations, more than max_configs = {}",
                self.axes.size(),
                self.max_configs
            ));
        }
        if self.axes.retrains() && self.training.is_none() {
            return bad("training axes need a [training] section".into());
        }
        if self.parallel == 0 {
            return bad("parallel must be at least 1".into());
        }
        Ok(())
    }
}

/// One configuration of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub label: String,
    pub guidance: GuidanceConfig,
    /// Set when the point retrains its models.
    pub training: Option<TrainingConfig>,
}

/// Expands the Cartesian product in a fixed axis order.
pub fn grid_points(base: &GuidanceConfig, training: Option<&TrainingConfig>, axes: &GridAxes) -> Vec<GridPoint> {
    let mut points = vec![GridPoint {
        label: String::new(),
        guidance: base.clone(),
        training: training.cloned(),
    }];
    fn expand<T: Clone + Display>(
        points: Vec<GridPoint>,
        name: &str,
        values: &[T],
        set: impl Fn(&mut GridPoint, &T),
    ) -> Vec<GridPoint> {
        if values.is_empty() {
            return points;
        }
        let mut out = Vec::with_capacity(points.len() * values.len());
        for p in points {
            for v in values {
                let mut q = p.clone();
                set(&mut q, v);
                if !q.label.is_empty() {
                    q.label.push(',');
                }
                q.label.push_str(&format!("{name}={v}"));
                out.push(q);
            }
        }
        out
    }
    let tr = |p: &mut GridPoint| {
        p.training
            .as_mut()
            .expect("training axes need a training config")
            .clone()
    };
    points = expand(points, "mode", &axes.mode, |p, v| p.guidance.mode = *v);
    points = expand(points, "coop", &axes.coop, |p, v| p.guidance.coop = *v);
    points = expand(points, "two_phase_threshold", &axes.two_phase_threshold, |p, v| {
        p.guidance.two_phase_threshold = *v
    });
    points = expand(points, "parental_threshold", &axes.parental_threshold, |p, v| {
        p.guidance.parental_threshold = *v
    });
    points = expand(points, "query_cap", &axes.query_cap, |p, v| p.guidance.query_cap = *v);
    points = expand(points, "context_cap", &axes.context_cap, |p, v| {
        p.guidance.context_cap = *v
    });
    points = expand(points, "pair_mode", &axes.pair_mode, |p, v| {
        p.guidance.pair_mode = *v;
        if let Some(t) = p.training.as_mut() {
            t.pair_mode = *v;
        }
    });
    points = expand(points, "rho", &axes.rho, |p, v| {
        let mut t = tr(p);
        t.parental_rho = Some(*v);
        p.training = Some(t);
    });
    points = expand(points, "trees", &axes.trees, |p, v| {
        let mut t = tr(p);
        t.clause.trees = *v;
        t.parental.trees = *v;
        p.training = Some(t);
    });
    points = expand(points, "max_leaves", &axes.max_leaves, |p, v| {
        let mut t = tr(p);
        t.clause.max_leaves = *v;
        t.parental.max_leaves = *v;
        p.training = Some(t);
    });
    points = expand(points, "learning_rate", &axes.learning_rate, |p, v| {
        let mut t = tr(p);
        t.clause.learning_rate = *v;
        t.parental.learning_rate = *v;
        p.training = Some(t);
    });
    points
}

/// A configuration ready to run: a label, a guidance config and its models.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub guidance: GuidanceConfig,
    pub models: Models,
}

/// Result of running several candidates on the same problems.
#[derive(Debug, Default)]
pub struct Comparison {
    pub table: ResultTable,
    /// Per candidate, in candidate order.
    pub records: Vec<Vec<ProblemRecord>>,
}

impl Comparison {
    pub fn solved_set(&self, label: &str) -> Vec<String> {
        self.records
            .iter()
            .find(|r| r.first().is_some_and(|x| x.config == label))
            .map(|rs| rs.iter().filter(|r| r.solved()).map(|r| r.problem.clone()).collect())
            .unwrap_or_default()
    }
}

/// Runs each candidate over `problems` and ranks the rows.
pub fn compare(
    problems: &[Problem],
    split: Option<SplitTag>,
    candidates: &[Candidate],
    limits: Limits,
    parallel: usize,
) -> Comparison {
    let mut out = Comparison::default();
    for c in candidates {
        let run = run_problems(
            problems,
            &c.label,
            split,
            &c.guidance,
            &c.models,
            limits,
            parallel,
            false,
        );
        log::info!(
            "{}: solved {}/{}",
            c.label,
            run.records.iter().filter(|r| r.solved()).count(),
            problems.len()
        );
        out.table
            .rows
            .push(ResultRow::from_records(&c.label, split, &run.records, run.wall_seconds));
        out.records.push(run.records);
    }
    out.table.rank();
    out
}

pub fn load_traces(dir: &Path) -> Result<Vec<(String, DerivationTrace)>, crate::Error> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "trace"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, read_trace(&std::fs::read_to_string(p)?)?))
        })
        .collect()
}

#[derive(Debug)]
pub struct GridOutcome {
    pub comparison: Comparison,
    /// The top ranked configuration, with model paths filled in when the
    /// models were retrained and an output directory was given.
    pub best: GuidanceConfig,
    pub best_label: String,
}

/// Runs every configuration of the grid and ranks them. With an output
/// directory, writes the records, the tables and `best.toml`.
pub fn grid_search(spec: &GridSpec) -> Result<GridOutcome, crate::Error> {
    spec.validate()?;
    let problems = spec.problems.load()?;
    let mut base = spec.base.clone();
    let server = match &spec.server {
        Some(s) => {
            let h = start_from_file(s)?;
            base.server = Some(h.local_addr().to_string());
            Some(h)
        }
        None => None,
    };
    let training = spec.training.as_ref();
    let points = grid_points(&base, training.map(|t| &t.config), &spec.axes);
    let traces = match training {
        Some(t) => load_traces(&t.traces)?,
        None => Vec::new(),
    };
    let loaded = Models::load(&base)?;
    let mut cache: HashMap<String, (Models, Option<super::training::TrainedModels>)> = HashMap::new();
    let mut candidates = Vec::new();
    for p in &points {
        let models = match &p.training {
            None => loaded.clone(),
            Some(t) => {
                let key = serde_json::to_string(t).expect("training configs serialize");
                if !cache.contains_key(&key) {
                    let wanted = Wanted {
                        fast: true,
                        slow: false,
                        parental: true,
                    };
                    let trained = train_models(&traces, t, &base.features, wanted)?;
                    let models = Models {
                        fast: trained.fast.clone().map(Arc::new),
                        parental: trained.parental.clone().map(Arc::new),
                    };
                    cache.insert(key.clone(), (models, Some(trained)));
                }
                cache[&key].0.clone()
            }
        };
        candidates.push(Candidate {
            label: p.label.clone(),
            guidance: p.guidance.clone(),
            models,
        });
    }
    let comparison = compare(&problems, spec.problems.split, &candidates, spec.limits, spec.parallel);
    if let Some(h) = server {
        h.shutdown();
    }
    let best_label = comparison.table.rows[0].config.clone();
    let point = points
        .iter()
        .find(|p| p.label == best_label)
        .expect("ranked rows come from points");
    let mut best = point.guidance.clone();
    if spec.server.is_some() {
        best.server = None;
    }
    if let Some(dir) = &spec.output {
        std::fs::create_dir_all(dir)?;
        for rs in &comparison.records {
            append_records(&dir.join("results.jsonl"), rs)?;
        }
        std::fs::write(dir.join("table.tsv"), comparison.table.to_tsv())?;
        std::fs::write(dir.join("table.txt"), comparison.table.render())?;
        if let Some(t) = &point.training {
            let key = serde_json::to_string(t).expect("training configs serialize");
            if let Some((_, Some(trained))) = cache.get(&key) {
                let files = trained.save(&dir.join("best-models"))?;
                best.fast_model = files.fast;
                best.parental_model = files.parental;
            }
        }
        let text = toml::to_string(&best).map_err(|e| crate::Error::Invalid(e.to_string()))?;
        std::fs::write(dir.join("best.toml"), text)?;
    }
    Ok(GridOutcome {
        comparison,
        best,
        best_label,
    })
}
