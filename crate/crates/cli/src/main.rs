use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tandem::features::{FeatureConfig, PairMode};
use tandem::gbdt::{read_dataset, save_model, train, write_dataset, TreeParams};
use tandem::harness::bench::{run_benchmark, BenchmarkSpec};
use tandem::harness::corpus::{generate, generate_corpus, write_corpus, Family};
use tandem::harness::experiment::{run_experiment, ExperimentSpec};
use tandem::harness::grid::{grid_search, load_traces, GridSpec};
use tandem::harness::learning::{run_loop, LoopSpec};
use tandem::problem::{write_trace, Problem};
use tandem::prover::{solve, GuidanceConfig, Limits, Mode, Status};
use tandem::server::{start_from_file, ServerConfig};
use tandem::traindata::{emit_dataset, LabelScheme, SamplingConfig};

#[derive(Parser)]
#[command(name = "tandem", version, about = "Resolution prover with learned clause selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve a clause model over TCP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
        #[arg(long, default_value_t = 28)]
        workers: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Seconds a worker waits for a full batch.
        #[arg(long, default_value_t = 0.01)]
        wait: f64,
    },
    /// Search for a refutation of one problem.
    Prove(ProveArgs),
    /// Run a benchmark spec.
    Bench { spec: PathBuf },
    /// Run a grid search spec.
    Grid { spec: PathBuf },
    /// Run the prove and learn loop.
    Loop { spec: PathBuf },
    /// Write generated problems as `.p` files.
    GenCorpus {
        /// One family; a mixed corpus when absent.
        #[arg(long)]
        family: Option<Family>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
    /// Turn a directory of traces into a labeled vector file.
    Dataset {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value = "proof-clauses")]
        scheme: LabelScheme,
        #[arg(long, default_value = "cat")]
        pair_mode: PairMode,
        /// Negatives kept per positive within each problem.
        #[arg(long)]
        rho: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vector file; statistics go next to it as `<out>.stats.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a tree model on a labeled vector file.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Vector length of the data; printed by `dataset`.
        #[arg(long)]
        dimension: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        trees: usize,
        #[arg(long, default_value_t = 32)]
        max_leaves: usize,
        #[arg(long, default_value_t = 8)]
        max_depth: usize,
        #[arg(long, default_value_t = 0.2)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the standard learning experiment on a generated corpus.
    Experiment {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Writes the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ProveArgs {
    file: PathBuf,
    /// Guidance settings as TOML; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    fast_model: Option<PathBuf>,
    #[arg(long)]
    parental_model: Option<PathBuf>,
    #[arg(long)]
    server: Option<String>,
    #[arg(long)]
    two_phase_threshold: Option<f64>,
    #[arg(long)]
    parental_threshold: Option<f64>,
    #[arg(long)]
    pair_mode: Option<PairMode>,
    #[arg(long)]
    query: Option<usize>,
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    coop: bool,
    #[arg(long)]
    max_processed: Option<usize>,
    #[arg(long)]
    max_generated: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    proof: Option<PathBuf>,
}

fn read_toml<T>(path: &PathBuf, parse: impl Fn(&str) -> Result<T, tandem::Error>) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse(&text)?)
}

fn prove(a: ProveArgs) -> Result<()> {
    let problem = Problem::load(&a.file)?;
    let mut cfg = match &a.config {
        Some(p) => read_toml(p, GuidanceConfig::from_toml)?,
        None => GuidanceConfig::default(),
    };
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    cfg.fast_model = a.fast_model.or(cfg.fast_model);
    cfg.parental_model = a.parental_model.or(cfg.parental_model);
    cfg.server = a.server.or(cfg.server);
    cfg.two_phase_threshold = a.two_phase_threshold.unwrap_or(cfg.two_phase_threshold);
    cfg.parental_threshold = a.parental_threshold.unwrap_or(cfg.parental_threshold);
    cfg.pair_mode = a.pair_mode.unwrap_or(cfg.pair_mode);
    cfg.query_cap = a.query.unwrap_or(cfg.query_cap);
    cfg.context_cap = a.context.unwrap_or(cfg.context_cap);
    cfg.coop |= a.coop;
    let mut limits = Limits::default();
    if a.max_processed.is_some() {
        limits.max_processed = a.max_processed;
    }
    if a.max_generated.is_some() {
        limits.max_generated = a.max_generated;
    }
    limits.wall_seconds = a.time;
    let result = solve(&problem, &cfg, limits)?;
    println!("status: {}", result.status.name());
    println!("{}", serde_json::to_string(&result.stats)?);
    if let Some(p) = &a.trace {
        std::fs::write(p, write_trace(&result.trace))?;
    }
    if let Some(p) = &a.proof {
        match &result.status {
            Status::Unsat(proof) => std::fs::write(p, write_trace(&proof.as_trace()))?,
            _ => log::warn!("no proof to write"),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve {
            model,
            addr,
            workers,
            batch,
            wait,
        } => {
            let cfg = ServerConfig {
                addr,
                workers,
                batch_size: batch,
                wait,
                model,
            };
            let h = start_from_file(&cfg)?;
            println!("listening on {}", h.local_addr());
            h.wait();
        }
        Command::Prove(a) => prove(a)?,
        Command::Bench { spec } => {
            let spec = read_toml(&spec, BenchmarkSpec::from_toml)?;
            let (table, _) = run_benchmark(&spec)?;
            print!("{}", table.render());
        }
        Command::Grid { spec } => {
            let spec = read_toml(&spec, GridSpec::from_toml)?;
            let out = grid_search(&spec)?;
            print!("{}", out.comparison.table.render());
            println!("best: {}", out.best_label);
        }
        Command::Loop { spec } => {
            let spec = read_toml(&spec, LoopSpec::from_toml)?;
            let report = run_loop(&spec)?;
            print!("{}", report.table().render());
        }
        Command::GenCorpus {
            family,
            count,
            seed,
            out,
        } => {
            let problems = match family {
                Some(f) => generate(f, count, seed),
                None => generate_corpus(count, seed),
            };
            write_corpus(&out, &problems)?;
            println!("wrote {} problems to {}", problems.len(), out.display());
        }
        Command::Dataset {
            traces,
            scheme,
            pair_mode,
            rho,
            seed,
            out,
        } => {
            let traces = load_traces(&traces)?;
            if traces.is_empty() {
                bail!("no .trace files found");
            }
            let data = emit_dataset(
                &traces,
                scheme,
                pair_mode,
                &FeatureConfig::default(),
                &SamplingConfig { rho, seed },
            )?;
            std::fs::write(&out, write_dataset(&data.examples))?;
            let mut stats = out.clone().into_os_string();
            stats.push(".stats.json");
            std::fs::write(&stats, serde_json::to_string_pretty(&data.stats)?)?;
            println!(
                "{} examples ({} positive, {} negative, {} mixed), dimension {}",
                data.examples.len(),
                data.stats.total.pos,
                data.stats.total.neg,
                data.stats.total.mixed,
                data.dimension
            );
        }
        Command::Train {
            data,
            dimension,
            out,
            trees,
            max_leaves,
            max_depth,
            learning_rate,
            seed,
        } => {
            let text = std::fs::read_to_string(&data)?;
            let name = data.display().to_string();
            let examples = read_dataset(&text, dimension, &name)?;
            let params = TreeParams {
                trees,
                max_leaves,
                max_depth,
                learning_rate,
                seed,
                ..TreeParams::default()
            };
            let model = train(&examples, &params)?;
            std::fs::write(&out, save_model(&model))?;
            println!(
                "trained {} trees on {} examples, training loss {:.4}",
                model.trees.len(),
                examples.len(),
                model.mean_loss(&examples)
            );
        }
        Command::Experiment { seed, count, out } => {
            let spec = ExperimentSpec {
                corpus_count: count,
                corpus_seed: seed,
                split_seed: seed,
                ..ExperimentSpec::default()
            };
            let report = run_experiment(&spec)?;
            println!(
                "baseline on train: {}/{}",
                report.train_baseline.solved, report.train_baseline.problems
            );
            print!("{}", report.dev.render());
            for c in &report.checks {
                println!(
                    "{} {}: {} = {} vs {} = {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.lhs,
                    c.lhs_solved,
                    c.rhs,
                    c.rhs_solved
                );
            }
            println!(
                "holdout ({}): {}/{}",
                report.holdout.config, report.holdout.solved, report.holdout.problems
            );
            if let Some(p) = out {
                std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
