//! Running one configuration over many problems.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::corpus::{load_corpus, split, SplitTag};
use crate::problem::{write_trace, DerivationTrace, Problem};
use crate::prover::{solve_with, GuidanceConfig, Limits, Models, Status};
use crate::server::{start_from_file, ServerConfig};

/// Outcome of one problem under one configuration; one JSON line in the
/// results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub problem: String,
    pub config: String,
    pub split: Option<SplitTag>,
    pub status: String,
    pub processed: usize,
    pub generated: usize,
    pub frozen: usize,
    pub revived: usize,
    pub penalized: usize,
    pub server_calls: usize,
    pub proof_length: Option<usize>,
    pub seconds: f64,
    pub server_seconds: f64,
    pub error: Option<String>,
}

impl ProblemRecord {
    pub fn solved(&self) -> bool {
        self.status == "unsat"
    }
}

/// Records in problem order plus, if requested, the traces of every run.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub records: Vec<ProblemRecord>,
    pub traces: Vec<(String, DerivationTrace)>,
    pub wall_seconds: f64,
}

/// Solves every problem with `parallel` worker threads. Results come back
/// in the order of `problems` whatever the parallelism. A run that fails
/// or panics is recorded as unsolved with an error note.
pub fn run_problems(
    problems: &[Problem],
    config_name: &str,
    split: Option<SplitTag>,
    cfg: &GuidanceConfig,
    models: &Models,
    limits: Limits,
    parallel: usize,
    keep_traces: bool,
) -> RunOutput {
    let started = Instant::now();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<(ProblemRecord, Option<DerivationTrace>)>>> = Mutex::new(vec![None; problems.len()]);
    std::thread::scope(|s| {
        for _ in 0..parallel.max(1).min(problems.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = problems.get(k) else { break };
                let out = run_one(p, config_name, split, cfg, models, limits, keep_traces);
                slots.lock().unwrap()[k] = Some(out);
            });
        }
    });
    let mut out = RunOutput {
        wall_seconds: started.elapsed().as_secs_f64(),
        ..RunOutput::default()
    };
    for (p, slot) in problems.iter().zip(slots.into_inner().unwrap()) {
        let (record, trace) = slot.expect("every problem was run");
        if let Some(t) = trace {
            out.traces.push((p.name.clone(), t));
        }
        out.records.push(record);
    }
    out
}

fn run_one(
    p: &Problem,
    config_name: &str,
    split: Option<SplitTag>,
    cfg: &GuidanceConfig,
    models: &Models,
    limits: Limits,
    keep_trace: bool,
) -> (ProblemRecord, Option<DerivationTrace>) {
    let mut record = ProblemRecord {
        problem: p.name.clone(),
        config: config_name.to_string(),
        split,
        status: "error".into(),
        processed: 0,
        generated: 0,
        frozen: 0,
        revived: 0,
        penalized: 0,
        server_calls: 0,
        proof_length: None,
        seconds: 0.0,
        server_seconds: 0.0,
        error: None,
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| solve_with(p, cfg, models, limits)));
    match result {
        Ok(Ok(r)) => {
            record.status = r.status.name().to_string();
            if let Status::Unsat(proof) = &r.status {
                record.proof_length = Some(proof.len());
            }
            let s = &r.stats;
            record.processed = s.processed;
            record.generated = s.generated;
            record.frozen = s.frozen;
            record.revived = s.revived;
            record.penalized = s.penalized;
            record.server_calls = s.server_calls;
            record.seconds = s.seconds;
            record.server_seconds = s.server_seconds;
            if s.server_failures > 0 {
                record.error = Some(format!("{} server failure(s)", s.server_failures));
            }
            (record, keep_trace.then_some(r.trace))
        }
        Ok(Err(e)) => {
            record.error = Some(e.to_string());
            (record, None)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            record.error = Some(format!("crashed: {msg}"));
            (record, None)
        }
    }
}

/// One row of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config: String,
    pub split: Option<SplitTag>,
    pub problems: usize,
    pub solved: usize,
    /// Means over all problems of the row.
    pub mean_processed: f64,
    pub mean_generated: f64,
    /// Sum of the per-problem prover times.
    pub prover_seconds: f64,
    pub wall_seconds: f64,
}

impl ResultRow {
    pub fn from_records(
        config: &str,
        split: Option<SplitTag>,
        records: &[ProblemRecord],
        wall_seconds: f64,
    ) -> ResultRow {
        let n = records.len();
        let mean = |f: &dyn Fn(&ProblemRecord) -> usize| {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<usize>() as f64 / n as f64
            }
        };
        ResultRow {
            config: config.to_string(),
            split,
            problems: n,
            solved: records.iter().filter(|r| r.solved()).count(),
            mean_processed: mean(&|r| r.processed),
            mean_generated: mean(&|r| r.generated),
            prover_seconds: records.iter().map(|r| r.seconds).sum(),
            wall_seconds,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Orders rows by solved count, then by mean processed ascending, then
    /// by config name so ties are stable.
    pub fn rank(&mut self) {
        self.rows.sort_by(|a, b| {
            b.solved
                .cmp(&a.solved)
                .then(a.mean_processed.total_cmp(&b.mean_processed))
                .then(a.config.cmp(&b.config))
        });
    }

    pub fn get(&self, config: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.config == config)
    }

    /// Tab separated, with a header line. Timing columns are left out so
    /// the table is a pure function of the per-problem statuses and counts.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("config\tsplit\tproblems\tsolved\tmean_processed\tmean_generated\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.2}\t{:.2}",
                r.config,
                r.split.map_or("-", |s| s.as_str()),
                r.problems,
                r.solved,
                r.mean_processed,
                r.mean_generated
            )
            .unwrap();
        }
        out
    }

    /// Aligned text for terminals, timing included.
    pub fn render(&self) -> String {
        let w = self.rows.iter().map(|r| r.config.len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "{:<w$}  {:>7}  {:>8}  {:>7}  {:>10}  {:>10}  {:>8}\n",
            "config", "split", "problems", "solved", "processed", "generated", "wall s"
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:<w$}  {:>7}  {:>8}  {:>7}  {:>10.1}  {:>10.1}  {:>8.2}",
                r.config,
                r.split.map_or("-", |s| s.as_str()),
                r.problems,
                r.solved,
                r.mean_processed,
                r.mean_generated,
                r.wall_seconds
            )
            .unwrap();
        }
        out
    }
}

/// Where the problems of a spec come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    /// A directory of `.p` files, or a list of files.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub files: Vec<PathBuf>,
    /// Restrict to one part of the seeded split of the directory.
    #[serde(default)]
    pub split: Option<SplitTag>,
    #[serde(default)]
    pub split_seed: u64,
}

impl ProblemSource {
    pub fn load(&self) -> Result<Vec<Problem>, crate::Error> {
        let mut problems = match &self.dir {
            Some(d) => load_corpus(d)?,
            None => Vec::new(),
        };
        for f in &self.files {
            problems.push(Problem::load(f)?);
        }
        if let Some(tag) = self.split {
            if tag == SplitTag::Holdout {
                return Err(crate::Error::Invalid(
                    "the holdout split is reserved for the final evaluation of the loop".into(),
                ));
            }
            problems = split(&problems, self.split_seed).get(tag).to_vec();
        }
        if problems.is_empty() {
            return Err(crate::Error::Invalid("no problems selected".into()));
        }
        Ok(problems)
    }
}

/// A benchmark run, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub name: String,
    pub problems: ProblemSource,
    #[serde(default)]
    pub guidance: GuidanceConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "one")]
    pub parallel: usize,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub save_traces: bool,
    /// Starts a server for the run instead of using `guidance.server`.
    pub server: Option<ServerConfig>,
}

fn one() -> usize {
    1
}

impl BenchmarkSpec {
    pub fn from_toml(text: &str) -> Result<BenchmarkSpec, crate::Error> {
        toml::from_str(text).map_err(|e| crate::Error::Invalid(format!("bad benchmark spec: {e}")))
    }
}

/// Appends `records` as JSON lines to `path`.
pub fn append_records(path: &Path, records: &[ProblemRecord]) -> std::io::Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).expect("records serialize"))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ProblemRecord>, crate::Error> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| crate::Error::Invalid(format!("bad record: {e}"))))
        .collect()
}

/// Writes traces as `dir/{problem}.trace`.
pub fn write_traces(dir: &Path, traces: &[(String, DerivationTrace)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, t) in traces {
        std::fs::write(dir.join(format!("{name}.trace")), write_trace(t))?;
    }
    Ok(())
}

/// Runs `spec`, persisting records, traces and tables under `spec.output`
/// when set.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<(ResultTable, RunOutput), crate::Error> {
    if spec.parallel == 0 {
        return Err(crate::Error::Invalid("parallel must be at least 1".into()));
    }
    let problems = spec.problems.load()?;
    let mut cfg = spec.guidance.clone();
    let server = match &spec.server {
        Some(s) => {
            let h = start_from_file(s)?;
            cfg.server = Some(h.local_addr().to_string());
            Some(h)
        }
        None => None,
    };
    let models = Models::load(&cfg)?;
    let out = run_problems(
        &problems,
        &spec.name,
        spec.problems.split,
        &cfg,
        &models,
        spec.limits,
        spec.parallel,
        spec.save_traces,
    );
    if let Some(h) = server {
        h.shutdown();
    }
    let mut table = ResultTable {
        rows: vec![ResultRow::from_records(
            &spec.name,
            spec.problems.split,
            &out.records,
            out.wall_seconds,
        )],
    };
    table.rank();
    if let Some(dir) = &spec.output {
        std::fs::create_dir_all(dir)?;
        append_records(&dir.join("results.jsonl"), &out.records)?;
        std::fs::write(dir.join("table.tsv"), table.to_tsv())?;
        std::fs::write(dir.join("table.txt"), table.render())?;
        if spec.save_traces {
            write_traces(&dir.join("traces"), &out.traces)?;
        }
    }
    Ok((table, out))
}
