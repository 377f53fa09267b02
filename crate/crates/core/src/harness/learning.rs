//! The prove, learn, prove again loop.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bench::{append_records, run_problems, write_traces, ResultRow, ResultTable};
use super::corpus::{generate_corpus, load_corpus, split, SplitTag};
use super::training::{train_models, TrainingConfig, Wanted};
use crate::problem::{DerivationTrace, Problem};
use crate::prover::{GuidanceConfig, Limits, Models};
use crate::server::{start, ServerConfig};
use crate::traindata::DatasetStats;

/// Either a directory of problems or a seeded generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub dir: Option<PathBuf>,
    pub generate: Option<GenerateSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub count: usize,
    pub seed: u64,
}

impl CorpusSource {
    pub fn load(&self) -> Result<Vec<Problem>, crate::Error> {
        match (&self.dir, &self.generate) {
            (Some(d), None) => load_corpus(d),
            (None, Some(g)) => Ok(generate_corpus(g.count, g.seed)),
            _ => Err(crate::Error::Invalid(
                "a corpus needs exactly one of `dir` and `generate`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub name: String,
    pub corpus: CorpusSource,
    #[serde(default)]
    pub split_seed: u64,
    pub iterations: usize,
    /// The guided configuration; model paths are filled in by the loop.
    pub guidance: GuidanceConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "one")]
    pub parallel: usize,
    pub output: Option<PathBuf>,
    /// Server settings for modes that use one; it serves the slow model of
    /// each iteration. The `model` field is ignored.
    #[serde(default)]
    pub server: ServerConfig,
}

fn one() -> usize {
    1
}

impl LoopSpec {
    pub fn from_toml(text: &str) -> Result<LoopSpec, crate::Error> {
        toml::from_str(text).map_err(|e| crate::Error::Invalid(format!("bad loop spec: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub train: ResultRow,
    pub dev: Option<ResultRow>,
    pub clause_stats: Option<DatasetStats>,
    pub pair_stats: Option<DatasetStats>,
    /// Why training was skipped, if it was.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopReport {
    pub baseline_dev: ResultRow,
    pub iterations: Vec<IterationReport>,
    /// Label of the configuration evaluated on the holdout.
    pub final_config: String,
    pub holdout: ResultRow,
}

impl LoopReport {
    pub fn table(&self) -> ResultTable {
        let mut rows = vec![self.baseline_dev.clone()];
        for it in &self.iterations {
            rows.push(it.train.clone());
            rows.extend(it.dev.clone());
        }
        rows.push(self.holdout.clone());
        ResultTable { rows }
    }
}

/// Models of the latest successful iteration.
struct Current {
    label: String,
    guidance: GuidanceConfig,
    models: Models,
    slow: Option<Arc<crate::gbdt::TreeModel>>,
}

/// Runs `problems` under `current`, starting a server for the slow model if
/// the mode needs one.
fn run_with(
    spec: &LoopSpec,
    current: &Current,
    problems: &[Problem],
    tag: SplitTag,
    keep_traces: bool,
) -> Result<super::bench::RunOutput, crate::Error> {
    let mut cfg = current.guidance.clone();
    let server = match (&current.slow, cfg.mode.uses_server()) {
        (Some(m), true) => {
            let h = start(&spec.server, m.clone())?;
            cfg.server = Some(h.local_addr().to_string());
            Some(h)
        }
        _ => None,
    };
    let out = run_problems(
        problems,
        &current.label,
        Some(tag),
        &cfg,
        &current.models,
        spec.limits,
        spec.parallel,
        keep_traces,
    );
    if let Some(h) = server {
        h.shutdown();
    }
    if let Some(dir) = &spec.output {
        std::fs::create_dir_all(dir)?;
        append_records(&dir.join("results.jsonl"), &out.records)?;
    }
    Ok(out)
}

/// Each iteration benchmarks the current configuration on train, trains
/// fresh models on every trace gathered so far, and benchmarks the guided
/// configuration on dev. The configuration of the last successful
/// iteration, or the baseline, is then evaluated on the holdout once.
pub fn run_loop(spec: &LoopSpec) -> Result<LoopReport, crate::Error> {
    if spec.parallel == 0 {
        return Err(crate::Error::Invalid("parallel must be at least 1".into()));
    }
    let problems = spec.corpus.load()?;
    let (train, dev, holdout) = split(&problems, spec.split_seed).guarded();
    if train.is_empty() || dev.is_empty() || holdout.is_empty() {
        return Err(crate::Error::Invalid(format!(
            "{} problems are too few for a train/dev/holdout split",
            problems.len()
        )));
    }
    let baseline = Current {
        label: "baseline".into(),
        guidance: GuidanceConfig {
            mode: crate::prover::Mode::Baseline,
            ..spec.guidance.clone()
        },
        models: Models::default(),
        slow: None,
    };
    let dev_run = run_with(spec, &baseline, &dev, SplitTag::Dev, false)?;
    let baseline_dev = ResultRow::from_records("baseline", Some(SplitTag::Dev), &dev_run.records, dev_run.wall_seconds);
    let mut current = baseline;
    let mut traces: BTreeMap<String, DerivationTrace> = BTreeMap::new();
    let mut iterations = Vec::new();
    let mode = spec.guidance.mode;
    let wanted = Wanted {
        fast: mode.needs_fast_model(),
        slow: mode.uses_server(),
        parental: mode.uses_parental(),
    };
    for it in 1..=spec.iterations {
        let run = run_with(spec, &current, &train, SplitTag::Train, true)?;
        let train_row = ResultRow::from_records(
            &format!("{}/train#{it}", current.label),
            Some(SplitTag::Train),
            &run.records,
            run.wall_seconds,
        );
        for (name, t) in run.traces {
            // a proof found earlier is worth more than a later failure
            let keep_old =
                traces.get(&name).is_some_and(|old| old.empty_clause().is_some()) && t.empty_clause().is_none();
            if !keep_old {
                traces.insert(name, t);
            }
        }
        let all: Vec<(String, DerivationTrace)> = traces.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        if let Some(dir) = &spec.output {
            write_traces(&dir.join(format!("iter{it}")).join("traces"), &all)?;
        }
        let trained = match train_models(&all, &spec.training, &spec.guidance.features, wanted) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("iteration {it}: training skipped: {e}");
                iterations.push(IterationReport {
                    iteration: it,
                    train: train_row,
                    dev: None,
                    clause_stats: None,
                    pair_stats: None,
                    skipped: Some(e.to_string()),
                });
                continue;
            }
        };
        let mut guidance = spec.guidance.clone();
        if let Some(dir) = &spec.output {
            let files = trained.save(&dir.join(format!("iter{it}")))?;
            guidance.fast_model = files.fast;
            guidance.parental_model = files.parental;
        }
        current = Current {
            label: format!("{}#{it}", mode),
            guidance,
            models: Models {
                fast: trained.fast.clone().map(Arc::new),
                parental: trained.parental.clone().map(Arc::new),
            },
            slow: trained.slow.clone().map(Arc::new),
        };
        let run = run_with(spec, &current, &dev, SplitTag::Dev, false)?;
        iterations.push(IterationReport {
            iteration: it,
            train: train_row,
            dev: Some(ResultRow::from_records(
                &current.label,
                Some(SplitTag::Dev),
                &run.records,
                run.wall_seconds,
            )),
            clause_stats: trained.clause_stats,
            pair_stats: trained.pair_stats,
            skipped: None,
        });
    }
    let run = holdout.evaluate(|ps| run_with(spec, &current, ps, SplitTag::Holdout, false))?;
    let report = LoopReport {
        baseline_dev,
        iterations,
        final_config: current.label.clone(),
        holdout: ResultRow::from_records(&current.label, Some(SplitTag::Holdout), &run.records, run.wall_seconds),
    };
    if let Some(dir) = &spec.output {
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&report).expect("reports serialize"),
        )?;
        let table = report.table();
        std::fs::write(dir.join("table.tsv"), table.to_tsv())?;
        std::fs::write(dir.join("table.txt"), table.render())?;
    }
    Ok(report)
}
