//! End-to-end acceptance checks. Runs as a plain binary so that each
//! criterion prints one PASS or FAIL line whatever the test runner captures.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{ground_problem, satisfiable, stump, GroundClause};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tandem::features::{FeatureConfig, PairMode, SparseVector};
use tandem::gbdt::{train, LabeledVector, TreeModel, TreeParams};
use tandem::harness::bench::run_problems;
use tandem::harness::corpus::{generate_corpus, load_corpus};
use tandem::harness::experiment::{default_budget, run_experiment, ExperimentReport, ExperimentSpec};
use tandem::logic::{ClauseId, Rule};
use tandem::problem::{check_proof, write_trace, DerivationTrace, Problem};
use tandem::prover::{solve_with, GuidanceConfig, Limits, Mode, Models, SolveResult, Status};
use tandem::server::{start, EvalClient, ServerConfig, ServerHandle};
use tandem::traindata::{emit_dataset, label_parental_data, LabelScheme, SamplingConfig};

const CORPUS_SEED: u64 = 1;
const CORPUS_SIZE: usize = 200;
/// Problems of the bundled corpus solved by Baseline under the default
/// budget, pinned from the first reference run.
const BASELINE_GOLDEN_SOLVED: usize = 113;
const SOUNDNESS_SECONDS: f64 = 300.0;
const GROUND_SECONDS: f64 = 300.0;
const GROUND_PROBLEMS: usize = 50;
const GROUND_MAX_ATOMS: u32 = 12;
const GROUND_MAX_GENERATED: usize = 50_000;
const SATURATION_MAX_ATOMS: u32 = 7;
const SATURATION_PROBLEMS: usize = 20;
const FILTER_THRESHOLD: f64 = 0.5;
const DEGENERATE_PROBLEMS: usize = 20;
const SERVER_VECTORS: usize = 1000;
const MIN_SPEEDUP: f64 = 1.5;
const RATIO_RANGE: (f64, f64) = (3.0, 4.0);
const EXPERIMENT_SECONDS: f64 = 1200.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bundled_corpus() -> Vec<Problem> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    load_corpus(&dir).expect("the bundled corpus loads")
}

/// Every tenth problem of the bundled corpus, spread over the families.
fn sample20(corpus: &[Problem]) -> Vec<Problem> {
    corpus
        .iter()
        .step_by(corpus.len() / DEGENERATE_PROBLEMS)
        .take(DEGENERATE_PROBLEMS)
        .cloned()
        .collect()
}

fn features() -> FeatureConfig {
    FeatureConfig::default()
}

/// Clause model that rejects clauses of more than two literals.
fn fast_model() -> TreeModel {
    let f = features();
    stump(f.dimension(), f.base as u32, 2.5, 2.0, -2.0)
}

/// Clause model preferring clauses with few symbols.
fn slow_model() -> TreeModel {
    let f = features();
    stump(f.dimension(), f.base as u32 + 3, 4.5, 2.0, -2.0)
}

/// Pair model that rejects pairs whose first parent has more than two
/// literals.
fn parental_model() -> TreeModel {
    let f = features();
    let dim = PairMode::Cat.output_dimension(f.dimension());
    stump(dim, f.base as u32, 2.5, 2.0, -2.0)
}

fn serve(model: TreeModel, workers: usize, batch: usize, wait: f64) -> ServerHandle {
    let cfg = ServerConfig {
        addr: "127.0.0.1:0".into(),
        workers,
        batch_size: batch,
        wait,
        ..ServerConfig::default()
    };
    start(&cfg, Arc::new(model)).expect("server starts")
}

fn guided(mode: Mode, server: Option<&ServerHandle>) -> GuidanceConfig {
    GuidanceConfig {
        mode,
        server: server.map(|h| h.local_addr().to_string()),
        features: features(),
        ..GuidanceConfig::default()
    }
}

fn all_models() -> Models {
    Models {
        fast: Some(Arc::new(fast_model())),
        parental: Some(Arc::new(parental_model())),
    }
}

fn criterion1() -> Outcome {
    let t = Instant::now();
    let corpus = bundled_corpus();
    ensure(corpus.len() >= CORPUS_SIZE, || {
        format!("only {} bundled problems", corpus.len())
    })?;
    let fresh: BTreeMap<String, String> = generate_corpus(CORPUS_SIZE, CORPUS_SEED)
        .into_iter()
        .map(|p| (p.name.clone(), p.to_text()))
        .collect();
    for p in &corpus {
        ensure(fresh.get(&p.name) == Some(&p.to_text()), || {
            format!("bundled problem {} differs from the generator", p.name)
        })?;
    }
    let cfg = GuidanceConfig::default();
    let (mut proofs, mut failures) = (0, Vec::new());
    for p in &corpus {
        let r = solve_with(p, &cfg, &Models::default(), default_budget()).map_err(|e| e.to_string())?;
        if let Status::Unsat(proof) = &r.status {
            proofs += 1;
            if let Err(e) = check_proof(proof, p) {
                failures.push(format!("{}: {e}", p.name));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(failures.is_empty(), || format!("rejected proofs: {failures:?}"))?;
    ensure(proofs > 0, || "no proofs found".into())?;
    ensure(proofs == BASELINE_GOLDEN_SOLVED, || {
        format!("baseline solved {proofs}, golden value {BASELINE_GOLDEN_SOLVED}")
    })?;
    ensure(secs < SOUNDNESS_SECONDS, || format!("took {secs:.0}s"))?;
    Ok(format!(
        "{} problems, {proofs} proofs checked, 0 rejected ({secs:.1}s)",
        corpus.len()
    ))
}

/// Random 3-literal clause sets over at most `max_atoms` atoms, sorted into
/// unsatisfiable and satisfiable ones by truth table.
fn ground_instances(
    seed: u64,
    max_atoms: u32,
    unsat: usize,
    sat: usize,
) -> (Vec<Vec<GroundClause>>, Vec<Vec<GroundClause>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut u, mut s) = (Vec::new(), Vec::new());
    while u.len() < unsat || s.len() < sat {
        let atoms = rng.gen_range(3..=max_atoms);
        let count = (atoms as f64 * rng.gen_range(3.5..6.0)).round() as usize;
        let clauses: Vec<GroundClause> = (0..count)
            .map(|_| {
                let mut vars: Vec<i32> = Vec::new();
                while vars.len() < 3 {
                    let v = rng.gen_range(1..=atoms as i32);
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
                vars.into_iter()
                    .map(|v| if rng.gen_bool(0.5) { v } else { -v })
                    .collect()
            })
            .collect();
        if satisfiable(&clauses, atoms) {
            if s.len() < sat {
                s.push(clauses);
            }
        } else if u.len() < unsat {
            u.push(clauses);
        }
    }
    (u, s)
}

fn criterion2() -> Outcome {
    let t = Instant::now();
    let (unsat, _) = ground_instances(2024, GROUND_MAX_ATOMS, GROUND_PROBLEMS, 0);
    let limits = Limits {
        max_generated: Some(GROUND_MAX_GENERATED),
        ..Limits::unlimited()
    };
    let mut misses = Vec::new();
    let mut most = 0;
    for (k, cs) in unsat.iter().enumerate() {
        let p = ground_problem(&format!("ground_{k}"), cs);
        let r = solve_with(&p, &GuidanceConfig::default(), &Models::default(), limits).map_err(|e| e.to_string())?;
        most = most.max(r.stats.generated);
        if !r.status.is_unsat() {
            misses.push(format!("ground_{k}: {}", r.status.name()));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(misses.is_empty(), || format!("misses: {misses:?}"))?;
    ensure(secs < GROUND_SECONDS, || format!("took {secs:.0}s"))?;
    Ok(format!(
        "{GROUND_PROBLEMS} unsatisfiable ground sets refuted, at most {most} generated ({secs:.1}s)"
    ))
}

fn criterion3() -> Outcome {
    let (unsat, _) = ground_instances(2024, GROUND_MAX_ATOMS, GROUND_PROBLEMS, 0);
    // saturating a satisfiable set costs up to 3^atoms clauses, so keep these small
    let (_, sat) = ground_instances(7, SATURATION_MAX_ATOMS, 0, SATURATION_PROBLEMS);
    let server = serve(slow_model(), 2, 8, 0.001);
    let models = all_models();
    let configs = [
        (
            "parental",
            GuidanceConfig {
                parental_threshold: FILTER_THRESHOLD,
                ..guided(Mode::Parental, None)
            },
        ),
        (
            "two-phase",
            GuidanceConfig {
                two_phase_threshold: FILTER_THRESHOLD,
                ..guided(Mode::TwoPhase, Some(&server))
            },
        ),
    ];
    let (mut frozen, mut penalized) = (0, 0);
    for (name, cfg) in &configs {
        for (k, cs) in unsat.iter().enumerate() {
            let p = ground_problem(&format!("ground_{k}"), cs);
            let r = solve_with(&p, cfg, &models, Limits::unlimited()).map_err(|e| e.to_string())?;
            ensure(r.status.is_unsat(), || {
                format!("{name} lost the refutation of ground_{k}")
            })?;
            frozen += r.stats.frozen;
            penalized += r.stats.penalized;
        }
        for (k, cs) in sat.iter().enumerate() {
            let p = ground_problem(&format!("sat_{k}"), cs);
            let r = solve_with(&p, cfg, &models, Limits::unlimited()).map_err(|e| e.to_string())?;
            ensure(matches!(r.status, Status::Saturated), || {
                format!("{name} on satisfiable sat_{k}: {}", r.status.name())
            })?;
            ensure(r.stats.frozen == r.stats.revived, || {
                format!("{name} saturated sat_{k} with frozen clauses left")
            })?;
            frozen += r.stats.frozen;
            penalized += r.stats.penalized;
        }
    }
    server.shutdown();
    ensure(frozen > 0 && penalized > 0, || {
        format!("filters never fired (frozen {frozen}, penalized {penalized})")
    })?;
    Ok(format!(
        "no lost refutations over {GROUND_PROBLEMS} problems in two modes, {SATURATION_PROBLEMS} satisfiable sets saturate only with empty freezer ({frozen} frozen, {penalized} penalized)"
    ))
}

fn run(p: &Problem, cfg: &GuidanceConfig, models: &Models) -> Result<SolveResult, String> {
    let limits = Limits {
        max_processed: Some(400),
        max_generated: Some(20_000),
        wall_seconds: None,
    };
    solve_with(p, cfg, models, limits).map_err(|e| e.to_string())
}

fn criterion4() -> Outcome {
    let problems = sample20(&bundled_corpus());
    let server = serve(slow_model(), 2, 8, 0.001);
    let models = all_models();
    let only_parental = Models {
        fast: None,
        parental: models.parental.clone(),
    };
    let zero_parental = GuidanceConfig {
        parental_threshold: 0.0,
        ..guided(Mode::Parental, None)
    };
    for p in &problems {
        let plain = run(p, &guided(Mode::Baseline, None), &Models::default())?;
        let filtered = run(p, &zero_parental, &only_parental)?;
        ensure(write_trace(&plain.trace) == write_trace(&filtered.trace), || {
            format!("{}: parental threshold 0 changed the baseline trace", p.name)
        })?;
        let coop = |mut c: GuidanceConfig| {
            c.coop = true;
            c
        };
        let local = run(p, &coop(guided(Mode::LocalModel, None)), &models)?;
        let filtered = run(p, &coop(zero_parental.clone()), &models)?;
        ensure(write_trace(&local.trace) == write_trace(&filtered.trace), || {
            format!("{}: parental threshold 0 changed the local-model trace", p.name)
        })?;
        let remote = run(p, &guided(Mode::ServerModel, Some(&server)), &models)?;
        let two = GuidanceConfig {
            two_phase_threshold: 0.0,
            ..guided(Mode::TwoPhase, Some(&server))
        };
        let two = run(p, &two, &models)?;
        ensure(remote.processed_order == two.processed_order, || {
            format!("{}: two-phase threshold 0 changed the processed sequence", p.name)
        })?;
    }
    server.shutdown();
    Ok(format!(
        "{} bundled problems: byte-identical traces at parental threshold 0, identical processed sequences at two-phase threshold 0",
        problems.len()
    ))
}

fn random_vectors(seed: u64, n: usize, dim: usize) -> Vec<SparseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut pairs = Vec::new();
            for i in 0..dim {
                if rng.gen_bool(0.25) {
                    pairs.push((i, rng.gen_range(1..6) as f64));
                }
            }
            SparseVector::from_pairs(dim, pairs)
        })
        .collect()
}

fn criterion5() -> Outcome {
    const DIM: usize = 64;
    let data: Vec<LabeledVector> = random_vectors(1, 400, DIM)
        .into_iter()
        .map(|v| LabeledVector {
            label: v.get(2) + v.get(9) > v.get(30) + 1.0,
            vector: v,
            problem: "x".into(),
        })
        .collect();
    let model = train(&data, &TreeParams::default()).map_err(|e| e.to_string())?;
    let vs = random_vectors(2, SERVER_VECTORS, DIM);

    let h = serve(model.clone(), 4, 8, 0.001);
    let mut c = EvalClient::connect(&h.local_addr().to_string()).map_err(|e| e.to_string())?;
    let mut remote = Vec::new();
    for chunk in vs.chunks(100) {
        remote.extend(c.score(chunk, vec![1, 2]).map_err(|e| e.to_string())?);
    }
    let local = model.score_all(&vs);
    let exact = local.iter().zip(&remote).all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(exact && remote.len() == vs.len(), || {
        "remote scores differ from local scores".into()
    })?;
    h.shutdown();

    let h = serve(model.clone(), 1, 8, 0.3);
    let addr = h.local_addr().to_string();
    let barrier = Arc::new(std::sync::Barrier::new(20));
    let threads: Vec<_> = (0..20)
        .map(|k| {
            let (addr, barrier, v) = (addr.clone(), barrier.clone(), vs[k].clone());
            std::thread::spawn(move || {
                let mut c = EvalClient::connect(&addr).expect("connect");
                barrier.wait();
                c.score(&[v], vec![]).expect("score").len()
            })
        })
        .collect();
    let answered: usize = threads.into_iter().map(|t| t.join().unwrap()).sum();
    let batches = h.stats().batch_sizes();
    h.shutdown();
    ensure(answered == 20 && batches == [8, 8, 4], || {
        format!("backlog batches {batches:?}")
    })?;

    let h = serve(model, 8, 8, 0.002);
    let addr = h.local_addr().to_string();
    let mut c = EvalClient::connect(&addr).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    for v in vs.chunks(1) {
        c.score(v, vec![]).map_err(|e| e.to_string())?;
    }
    let sequential = t0.elapsed();
    let t0 = Instant::now();
    let threads: Vec<_> = vs
        .chunks(SERVER_VECTORS / 8)
        .map(|part| {
            let (addr, part) = (addr.clone(), part.to_vec());
            std::thread::spawn(move || {
                let mut c = EvalClient::connect(&addr).expect("connect");
                for q in part.chunks(10) {
                    c.score(q, vec![]).expect("score");
                }
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    let batched = t0.elapsed();
    h.shutdown();
    let speedup = sequential.as_secs_f64() / batched.as_secs_f64().max(1e-9);
    ensure(speedup >= MIN_SPEEDUP, || {
        format!("batched {batched:?} vs sequential {sequential:?}: speedup {speedup:.2}")
    })?;
    Ok(format!(
        "{SERVER_VECTORS} scores bit-exact, backlog batches {batches:?}, batched speedup {speedup:.1}x"
    ))
}

type Pair = (ClauseId, ClauseId);

fn unordered(a: ClauseId, b: ClauseId) -> Pair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Independent pair labels: for each unordered resolution pair, whether any
/// child is good and whether some child is good while another is not.
fn pair_oracle(
    trace: &DerivationTrace,
    good: impl Fn(&tandem::problem::TraceRecord) -> bool,
) -> HashMap<Pair, (bool, bool)> {
    let mut seen: HashMap<Pair, (bool, bool)> = HashMap::new();
    for r in &trace.records {
        if r.rule != Rule::Resolution {
            continue;
        }
        let e = seen
            .entry(unordered(r.parents[0], r.parents[1]))
            .or_insert((false, false));
        if good(r) {
            e.0 = true;
        } else {
            e.1 = true;
        }
    }
    seen.into_iter().map(|(k, (g, b))| (k, (g, g && b))).collect()
}

fn criterion6() -> Outcome {
    let problems = sample20(&bundled_corpus());
    let run = run_problems(
        &problems,
        "baseline",
        None,
        &GuidanceConfig::default(),
        &Models::default(),
        default_budget(),
        1,
        true,
    );
    let traces = run.traces;
    let (mut mixed, mut proof_pos, mut given_pos) = (0, 0, 0);
    for (name, t) in &traces {
        let proof = label_parental_data(t, LabelScheme::ProofParents, name);
        let given = label_parental_data(t, LabelScheme::GivenParents, name);
        let given_set: BTreeSet<Pair> = given
            .iter()
            .filter(|r| r.label)
            .map(|r| unordered(r.parents.0, r.parents.1))
            .collect();
        for r in proof.iter().filter(|r| r.label) {
            ensure(given_set.contains(&unordered(r.parents.0, r.parents.1)), || {
                format!("{name}: proof-positive pair {:?} is not given-positive", r.parents)
            })?;
        }
        proof_pos += proof.iter().filter(|r| r.label).count();
        given_pos += given_set.len();
        if proof.is_empty() {
            continue;
        }
        let oracle = pair_oracle(t, |r| r.in_proof);
        ensure(oracle.len() == proof.len(), || {
            format!("{name}: one record per pair expected")
        })?;
        for r in &proof {
            let (label, is_mixed) = oracle[&unordered(r.parents.0, r.parents.1)];
            ensure(r.label == label && r.mixed == is_mixed, || {
                format!("{name}: pair {:?} labeled {} mixed {}", r.parents, r.label, r.mixed)
            })?;
            if r.mixed {
                mixed += 1;
                ensure(r.label, || format!("{name}: mixed pair labeled negative"))?;
            }
        }
    }
    ensure(mixed > 0, || "no mixed pairs in the trace set".into())?;
    let data = emit_dataset(
        &traces,
        LabelScheme::ProofParents,
        PairMode::Cat,
        &features(),
        &SamplingConfig { rho: Some(4), seed: 0 },
    )
    .map_err(|e| e.to_string())?;
    let ratio = data.stats.total.neg as f64 / data.stats.total.pos as f64;
    ensure((RATIO_RANGE.0..=RATIO_RANGE.1).contains(&ratio), || {
        format!("negative to positive ratio {ratio:.3}")
    })?;
    Ok(format!(
        "{} traces: {proof_pos} proof-positive pairs within {given_pos} given-positive pairs, {mixed} mixed pairs all positive, sampled ratio {ratio:.2}",
        traces.len()
    ))
}

fn experiment() -> Result<(ExperimentReport, f64), String> {
    let t = Instant::now();
    let r = run_experiment(&ExperimentSpec::default()).map_err(|e| e.to_string())?;
    Ok((r, t.elapsed().as_secs_f64()))
}

fn criterion7(first: &Result<(ExperimentReport, f64), String>) -> Outcome {
    let (r, secs) = first.as_ref().map_err(|e| e.clone())?;
    let lines: Vec<String> = r
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} {}={} vs {}={}",
                if c.pass { "ok" } else { "FAILED" },
                c.lhs,
                c.lhs_solved,
                c.rhs,
                c.rhs_solved
            )
        })
        .collect();
    ensure(r.passed(), || lines.join("; "))?;
    ensure(*secs < EXPERIMENT_SECONDS, || format!("took {secs:.0}s"))?;
    Ok(format!(
        "dev of {}: {} ({secs:.0}s)",
        r.dev.rows[0].problems,
        lines.join("; ")
    ))
}

fn criterion8(
    first: &Result<(ExperimentReport, f64), String>,
    second: &Result<(ExperimentReport, f64), String>,
) -> Outcome {
    let (a, _) = first.as_ref().map_err(|e| e.clone())?;
    let (b, _) = second.as_ref().map_err(|e| e.clone())?;
    ensure(a.solved == b.solved, || "solved sets differ between runs".into())?;
    ensure(a.dev.to_tsv() == b.dev.to_tsv(), || {
        format!("dev tables differ:\n{}\n{}", a.dev.to_tsv(), b.dev.to_tsv())
    })?;
    ensure(a.train_baseline.solved == b.train_baseline.solved, || {
        "train baseline differs".into()
    })?;
    ensure(
        (a.holdout.solved, a.holdout.mean_processed) == (b.holdout.solved, b.holdout.mean_processed),
        || "holdout results differ".into(),
    )?;
    ensure(
        a.best_two_phase == b.best_two_phase && a.best_parental == b.best_parental,
        || "grid choices differ".into(),
    )?;
    Ok(format!(
        "{} dev rows and all solved sets identical across two runs",
        a.dev.rows.len()
    ))
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = Duration::from_secs_f64(t.elapsed().as_secs_f64());
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {n} {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {n} {name}: {detail} ({secs:.1?})");
            false
        }
    }
}

fn main() {
    // numeric arguments select criteria, e.g. `cargo test --test acceptance -- 3 6`
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |n: usize| picked.is_empty() || picked.contains(&n);
    let mut ok = true;
    let criteria: [Criterion; 6] = [
        ("soundness", criterion1),
        ("ground completeness", criterion2),
        ("filter safety", criterion3),
        ("degenerate thresholds", criterion4),
        ("server equivalence and batching", criterion5),
        ("labeling and sampling", criterion6),
    ];
    for (k, (name, f)) in criteria.into_iter().enumerate() {
        if on(k + 1) {
            ok &= report(k + 1, name, f);
        }
    }
    if on(7) || on(8) {
        let first = experiment();
        ok &= report(7, "learning effectiveness", || criterion7(&first));
        if on(8) {
            let second = experiment();
            ok &= report(8, "determinism", || criterion8(&first, &second));
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
