//! The standard learning experiment: baseline on train, train the three
//! models, compare guided modes on dev, evaluate the winner on holdout.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bench::{run_problems, ResultRow, ResultTable};
use super::corpus::{generate_corpus, split, SplitTag};
use super::grid::{compare, Candidate};
use super::training::{train_models, TrainingConfig, Wanted};
use crate::prover::{GuidanceConfig, Limits, Mode, Models};
use crate::server::{start, ServerConfig};
use crate::traindata::DatasetStats;

/// The default clause budget of benchmark runs.
pub fn default_budget() -> Limits {
    Limits {
        max_processed: Some(2000),
        max_generated: Some(50_000),
        wall_seconds: None,
    }
}

pub const PARENTAL_THRESHOLDS: [f64; 9] = [0.005, 0.01, 0.03, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
pub const TWO_PHASE_THRESHOLDS: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub corpus_count: usize,
    pub corpus_seed: u64,
    pub split_seed: u64,
    pub limits: Limits,
    pub parallel: usize,
    /// Guidance settings shared by every guided row; mode, thresholds and
    /// model paths are set per row.
    pub guidance: GuidanceConfig,
    pub training: TrainingConfig,
    pub two_phase_thresholds: Vec<f64>,
    pub parental_thresholds: Vec<f64>,
    pub server: ServerConfig,
}

impl Default for ExperimentSpec {
    fn default() -> ExperimentSpec {
        ExperimentSpec {
            corpus_count: 200,
            corpus_seed: 1,
            split_seed: 1,
            limits: default_budget(),
            parallel: 2,
            guidance: GuidanceConfig {
                coop: true,
                ..GuidanceConfig::default()
            },
            training: TrainingConfig::default(),
            two_phase_thresholds: TWO_PHASE_THRESHOLDS.to_vec(),
            parental_thresholds: PARENTAL_THRESHOLDS.to_vec(),
            server: ServerConfig {
                addr: "127.0.0.1:0".into(),
                workers: 2,
                batch_size: 8,
                wait: 0.001,
                ..ServerConfig::default()
            },
        }
    }
}

/// One directional comparison between two dev rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: String,
    pub lhs_solved: usize,
    pub rhs: String,
    pub rhs_solved: usize,
    /// The check passes when `lhs_solved + slack >= rhs_solved`.
    pub slack: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub train_baseline: ResultRow,
    pub clause_stats: Option<DatasetStats>,
    pub pair_stats: Option<DatasetStats>,
    pub dev: ResultTable,
    /// Solved problem names per dev row.
    pub solved: BTreeMap<String, Vec<String>>,
    pub best_two_phase: String,
    pub best_parental: String,
    pub checks: Vec<Check>,
    pub holdout: ResultRow,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub const BASELINE: &str = "baseline";
pub const LOCAL: &str = "local-model";
pub const LOCAL_ALONE: &str = "local-model-no-coop";

pub fn two_phase_label(t: f64) -> String {
    format!("two-phase@{t}")
}

pub fn parental_label(t: f64) -> String {
    format!("parental@{t}")
}

/// Best row among `labels`, by the table's ranking.
fn best_of(table: &ResultTable, labels: &[String]) -> String {
    table
        .rows
        .iter()
        .find(|r| labels.contains(&r.config))
        .map(|r| r.config.clone())
        .expect("every grid row is in the table")
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, crate::Error> {
    let problems = generate_corpus(spec.corpus_count, spec.corpus_seed);
    let (train, dev, holdout) = split(&problems, spec.split_seed).guarded();
    if dev.is_empty() || holdout.is_empty() {
        return Err(crate::Error::Invalid("the corpus is too small to split".into()));
    }
    let base = GuidanceConfig {
        mode: Mode::Baseline,
        ..spec.guidance.clone()
    };
    let run = run_problems(
        &train,
        BASELINE,
        Some(SplitTag::Train),
        &base,
        &Models::default(),
        spec.limits,
        spec.parallel,
        true,
    );
    let train_baseline = ResultRow::from_records(BASELINE, Some(SplitTag::Train), &run.records, run.wall_seconds);
    log::info!(
        "baseline on train: {}/{}",
        train_baseline.solved,
        train_baseline.problems
    );

    let trained = train_models(&run.traces, &spec.training, &spec.guidance.features, Wanted::ALL)?;
    let models = Models {
        fast: trained.fast.clone().map(Arc::new),
        parental: trained.parental.clone().map(Arc::new),
    };
    let slow = Arc::new(trained.slow.clone().expect("the slow model was requested"));
    let server = start(&spec.server, slow)?;
    let addr = server.local_addr().to_string();

    let with = |mode: Mode, f: &dyn Fn(&mut GuidanceConfig)| {
        let mut g = GuidanceConfig {
            mode,
            server: mode.uses_server().then(|| addr.clone()),
            pair_mode: spec.training.pair_mode,
            ..spec.guidance.clone()
        };
        f(&mut g);
        g
    };
    let cand = |label: String, guidance: GuidanceConfig| Candidate {
        label,
        guidance,
        models: models.clone(),
    };
    let mut candidates = vec![
        cand(BASELINE.into(), with(Mode::Baseline, &|_| {})),
        cand(LOCAL.into(), with(Mode::LocalModel, &|g| g.coop = true)),
        cand(LOCAL_ALONE.into(), with(Mode::LocalModel, &|g| g.coop = false)),
    ];
    let tp_labels: Vec<String> = spec.two_phase_thresholds.iter().map(|&t| two_phase_label(t)).collect();
    for &t in &spec.two_phase_thresholds {
        candidates.push(cand(
            two_phase_label(t),
            with(Mode::TwoPhase, &|g| g.two_phase_threshold = t),
        ));
    }
    let par_labels: Vec<String> = spec.parental_thresholds.iter().map(|&t| parental_label(t)).collect();
    for &t in &spec.parental_thresholds {
        candidates.push(cand(
            parental_label(t),
            with(Mode::Parental, &|g| g.parental_threshold = t),
        ));
    }
    let mut cmp = compare(&dev, Some(SplitTag::Dev), &candidates, spec.limits, spec.parallel);
    let best_two_phase = best_of(&cmp.table, &tp_labels);
    let best_parental = best_of(&cmp.table, &par_labels);
    let pick = |label: &str| -> GuidanceConfig {
        candidates
            .iter()
            .find(|c| c.label == label)
            .expect("best rows come from candidates")
            .guidance
            .clone()
    };
    let (tp, pp) = (
        pick(&best_two_phase).two_phase_threshold,
        pick(&best_parental).parental_threshold,
    );
    let three = cand(
        format!("three-phase@{tp},{pp}"),
        with(Mode::ThreePhase, &|g| {
            g.two_phase_threshold = tp;
            g.parental_threshold = pp;
        }),
    );
    let extra = compare(
        &dev,
        Some(SplitTag::Dev),
        std::slice::from_ref(&three),
        spec.limits,
        spec.parallel,
    );
    cmp.table.rows.extend(extra.table.rows);
    cmp.records.extend(extra.records);
    cmp.table.rank();
    candidates.push(three.clone());

    let holdout_run = holdout.evaluate(|ps| {
        run_problems(
            ps,
            &three.label,
            Some(SplitTag::Holdout),
            &three.guidance,
            &three.models,
            spec.limits,
            spec.parallel,
            false,
        )
    });
    server.shutdown();

    let solved_of = |label: &str| cmp.table.get(label).map_or(0, |r| r.solved);
    let check = |name: &str, lhs: &str, rhs: &str, slack: usize| {
        let (l, r) = (solved_of(lhs), solved_of(rhs));
        Check {
            name: name.into(),
            lhs: lhs.into(),
            lhs_solved: l,
            rhs: rhs.into(),
            rhs_solved: r,
            slack,
            pass: l + slack >= r,
        }
    };
    let top = if solved_of(&best_two_phase) >= solved_of(&best_parental) {
        best_two_phase.clone()
    } else {
        best_parental.clone()
    };
    let checks = vec![
        check("coop local model vs baseline", LOCAL, BASELINE, 0),
        check("best two-phase vs local model", &best_two_phase, LOCAL, 0),
        check("best parental vs local model", &best_parental, LOCAL, 0),
        check("three-phase vs best of two-phase and parental", &three.label, &top, 1),
    ];
    let solved = candidates
        .iter()
        .map(|c| (c.label.clone(), cmp.solved_set(&c.label)))
        .collect();
    Ok(ExperimentReport {
        train_baseline,
        clause_stats: trained.clause_stats,
        pair_stats: trained.pair_stats,
        dev: cmp.table,
        solved,
        best_two_phase,
        best_parental,
        checks,
        holdout: ResultRow::from_records(
            &three.label,
            Some(SplitTag::Holdout),
            &holdout_run.records,
            holdout_run.wall_seconds,
        ),
    })
}
