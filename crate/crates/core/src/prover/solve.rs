use std::collections::{HashMap, HashSet};
use std::time::Instant;

use super::guidance::{parental_filter, two_phase_evaluate};
use super::queues::{Selection, Unprocessed};
use super::{
    GuidanceConfig, Limits, Mode, Models, ProverError, SolveResult, SolveStats, Status, FUNCTION_WEIGHT,
    VARIABLE_WEIGHT,
};
use crate::features::{featurize_clause, SparseVector};
use crate::gbdt::TreeModel;
use crate::logic::{factor, is_tautology, resolve, symbol_weight, unit_subsumes, Clause, ClauseId, Symbol};
use crate::problem::{DerivationTrace, Problem, ProofObject, TraceRecord};
use crate::server::{ClientError, EvalClient};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Unprocessed,
    Processed,
    Frozen,
    Discarded,
}

enum Simplified {
    Empty,
    Discard,
    Keep,
}

type LitKey = (bool, Symbol);

/// State of one run of the given-clause loop.
pub struct Prover<'a> {
    cfg: &'a GuidanceConfig,
    fast: Option<&'a TreeModel>,
    parental: Option<&'a TreeModel>,
    limits: Limits,
    clauses: Vec<Clause>,
    place: Vec<Place>,
    processed_order: Vec<ClauseId>,
    /// Literals of processed clauses by (polarity, predicate).
    index: HashMap<LitKey, Vec<(u32, usize)>>,
    /// Processed unit clauses by (polarity, predicate).
    units: HashMap<LitKey, Vec<u32>>,
    seen: HashSet<String>,
    queues: Unprocessed,
    freezer: Vec<ClauseId>,
    vectors: HashMap<u32, SparseVector>,
    client: Option<EvalClient>,
    server_down: bool,
    stats: SolveStats,
    started: Instant,
}

/// Loads the models named in `cfg` and runs [`solve_with`].
pub fn solve(problem: &Problem, cfg: &GuidanceConfig, limits: Limits) -> Result<SolveResult, crate::Error> {
    let models = Models::load(cfg)?;
    Ok(solve_with(problem, cfg, &models, limits)?)
}

pub fn solve_with(
    problem: &Problem,
    cfg: &GuidanceConfig,
    models: &Models,
    limits: Limits,
) -> Result<SolveResult, ProverError> {
    Ok(Prover::new(cfg, models, limits)?.run(problem))
}

impl<'a> Prover<'a> {
    pub fn new(cfg: &'a GuidanceConfig, models: &'a Models, limits: Limits) -> Result<Prover<'a>, ProverError> {
        cfg.validate()?;
        let dim = cfg.features.dimension();
        let mode = cfg.mode;
        let fast = match (&models.fast, mode) {
            (None, m) if m.needs_fast_model() => {
                return Err(ProverError::Missing {
                    mode,
                    what: "fast model",
                })
            }
            (Some(m), Mode::LocalModel | Mode::TwoPhase | Mode::ThreePhase | Mode::Parental) => Some(m.as_ref()),
            _ => None,
        };
        let parental = match (&models.parental, mode.uses_parental()) {
            (None, true) => {
                return Err(ProverError::Missing {
                    mode,
                    what: "parental model",
                })
            }
            (Some(m), true) => Some(m.as_ref()),
            _ => None,
        };
        if mode.uses_server() && cfg.server.is_none() {
            return Err(ProverError::Missing {
                mode,
                what: "server address",
            });
        }
        if let Some(m) = fast {
            if m.dimension != dim {
                return Err(ProverError::Dimension {
                    which: "fast",
                    expected: dim,
                    found: m.dimension,
                });
            }
        }
        if let Some(m) = parental {
            let want = cfg.pair_mode.output_dimension(dim);
            if m.dimension != want {
                return Err(ProverError::Dimension {
                    which: "parental",
                    expected: want,
                    found: m.dimension,
                });
            }
        }
        Ok(Prover {
            cfg,
            fast,
            parental,
            limits,
            clauses: Vec::new(),
            place: Vec::new(),
            processed_order: Vec::new(),
            index: HashMap::new(),
            units: HashMap::new(),
            seen: HashSet::new(),
            queues: Unprocessed::new(),
            freezer: Vec::new(),
            vectors: HashMap::new(),
            client: None,
            server_down: false,
            stats: SolveStats::default(),
            started: Instant::now(),
        })
    }

    fn learned_active(&self) -> bool {
        !self.stats.degraded
            && match self.cfg.mode {
                Mode::Baseline => false,
                Mode::Parental => self.fast.is_some(),
                _ => true,
            }
    }

    fn selection(&self) -> Selection {
        if !self.learned_active() {
            Selection::Baseline
        } else if self.cfg.coop {
            Selection::Coop
        } else {
            Selection::Learned
        }
    }

    /// Runs the loop on `problem` to completion or until a limit is hit.
    pub fn run(mut self, problem: &Problem) -> SolveResult {
        self.started = Instant::now();
        if self.cfg.mode.uses_server() {
            let addr = self.cfg.server.clone().unwrap_or_default();
            match EvalClient::connect(&addr) {
                Ok(c) => self.client = Some(c),
                Err(e) => {
                    log::warn!("cannot reach evaluation server {addr}: {e}");
                    self.server_failed();
                }
            }
        }

        let mut kept = Vec::new();
        for input in problem.input_clauses() {
            let id = ClauseId(self.clauses.len() as u32);
            let mut c = input.clone();
            c.id = id;
            self.clauses.push(c);
            self.place.push(Place::Unprocessed);
            match self.simplify(id) {
                Simplified::Empty => return self.finish(Some(id)),
                Simplified::Discard => {}
                Simplified::Keep => kept.push(id),
            }
        }
        self.enqueue(&kept);

        loop {
            if self.limits.max_processed.is_some_and(|m| self.stats.processed >= m) || self.out_of_time() {
                return self.finish(None);
            }
            let place = &self.place;
            let selected = self
                .queues
                .select(self.selection(), |id| place[id.0 as usize] == Place::Unprocessed);
            let Some((given, _)) = selected else {
                if self.freezer.is_empty() {
                    return self.finish(None);
                }
                if let Some(empty) = self.revive_frozen() {
                    return self.finish(Some(empty));
                }
                continue;
            };
            if let Some(empty) = self.process(given) {
                return self.finish(Some(empty));
            }
            if self.limits.max_generated.is_some_and(|m| self.stats.generated >= m) {
                return self.finish(None);
            }
        }
    }

    fn out_of_time(&self) -> bool {
        self.limits
            .wall_seconds
            .is_some_and(|s| self.started.elapsed().as_secs_f64() >= s)
    }

    /// Moves `given` to processed, generates all its inferences with the
    /// processed clauses, and files the children. Returns the id of an
    /// empty clause if one survives the filter.
    fn process(&mut self, given: ClauseId) -> Option<ClauseId> {
        let g = given.0 as usize;
        self.place[g] = Place::Processed;
        self.processed_order.push(given);
        self.stats.processed += 1;
        for (k, l) in self.clauses[g].literals.iter().enumerate() {
            self.index
                .entry((l.positive, l.predicate().clone()))
                .or_default()
                .push((given.0, k));
        }
        if self.clauses[g].is_unit() {
            let l = &self.clauses[g].literals[0];
            self.units
                .entry((l.positive, l.predicate().clone()))
                .or_default()
                .push(given.0);
        }

        let room = self
            .limits
            .max_generated
            .map_or(usize::MAX, |m| m.saturating_sub(self.stats.generated));
        let mut children = Vec::new();
        let gc = &self.clauses[g];
        'outer: for (i, l) in gc.literals.iter().enumerate() {
            let Some(partners) = self.index.get(&(!l.positive, l.predicate().clone())) else {
                continue;
            };
            for &(p, j) in partners {
                if children.len() >= room {
                    break 'outer;
                }
                if let Some(r) = resolve(gc, i, &self.clauses[p as usize], j) {
                    children.push(r);
                }
            }
        }
        for f in factor(gc) {
            if children.len() >= room {
                break;
            }
            children.push(f);
        }

        for c in &mut children {
            c.id = ClauseId(self.clauses.len() as u32);
            self.clauses.push(c.clone());
            self.place.push(Place::Unprocessed);
        }
        self.stats.generated += children.len();

        let passed: Vec<ClauseId> = match self.parental {
            Some(model) => {
                let (cfg, clauses, vectors) = (self.cfg, &self.clauses, &mut self.vectors);
                let mut parent_vector = |id: ClauseId| {
                    vectors
                        .entry(id.0)
                        .or_insert_with(|| featurize_clause(&clauses[id.0 as usize], &cfg.features))
                        .clone()
                };
                let out = parental_filter(
                    children,
                    model,
                    cfg.parental_threshold,
                    cfg.pair_mode,
                    &cfg.features,
                    &mut parent_vector,
                );
                self.stats.parental_calls += out.model_calls;
                for c in &out.freeze {
                    self.place[c.id.0 as usize] = Place::Frozen;
                    self.clauses[c.id.0 as usize].frozen = true;
                    self.freezer.push(c.id);
                }
                self.stats.frozen += out.freeze.len();
                out.pass.iter().map(|c| c.id).collect()
            }
            None => children.iter().map(|c| c.id).collect(),
        };

        let mut kept = Vec::new();
        for id in passed {
            match self.simplify(id) {
                Simplified::Empty => return Some(id),
                Simplified::Discard => {}
                Simplified::Keep => kept.push(id),
            }
        }
        self.enqueue(&kept);
        None
    }

    /// Forward simplification of a new clause: tautologies, variants of
    /// kept clauses and clauses subsumed by a processed unit are discarded.
    fn simplify(&mut self, id: ClauseId) -> Simplified {
        let c = &self.clauses[id.0 as usize];
        if c.is_empty() {
            return Simplified::Empty;
        }
        let redundant = is_tautology(c) || self.unit_subsumed(c);
        if redundant || !self.seen.insert(c.variant_key()) {
            self.place[id.0 as usize] = Place::Discarded;
            self.stats.discarded += 1;
            return Simplified::Discard;
        }
        self.place[id.0 as usize] = Place::Unprocessed;
        Simplified::Keep
    }

    fn unit_subsumed(&self, c: &Clause) -> bool {
        c.literals.iter().any(|l| {
            self.units.get(&(l.positive, l.predicate().clone())).is_some_and(|us| {
                us.iter()
                    .any(|u| unit_subsumes(&self.clauses[*u as usize].literals[0], c))
            })
        })
    }

    /// Thaws the whole freezer through simplification and evaluation.
    /// Revived clauses are never frozen again.
    fn revive_frozen(&mut self) -> Option<ClauseId> {
        let frozen = std::mem::take(&mut self.freezer);
        self.stats.revived += frozen.len();
        let mut kept = Vec::new();
        for id in frozen {
            self.clauses[id.0 as usize].frozen = false;
            match self.simplify(id) {
                Simplified::Empty => return Some(id),
                Simplified::Discard => {}
                Simplified::Keep => kept.push(id),
            }
        }
        self.enqueue(&kept);
        None
    }

    fn vector(&mut self, id: ClauseId) -> SparseVector {
        let (clauses, cfg) = (&self.clauses, self.cfg);
        self.vectors
            .entry(id.0)
            .or_insert_with(|| featurize_clause(&clauses[id.0 as usize], &cfg.features))
            .clone()
    }

    fn baseline_weight(&self, id: ClauseId) -> u64 {
        symbol_weight(&self.clauses[id.0 as usize], FUNCTION_WEIGHT, VARIABLE_WEIGHT)
    }

    /// Scores `ids` with the active pipeline and pushes them on the queues.
    fn enqueue(&mut self, ids: &[ClauseId]) {
        if ids.is_empty() {
            return;
        }
        let learned = self.learned_active();
        if !learned || self.cfg.coop {
            for &id in ids {
                let w = self.baseline_weight(id);
                self.queues.push_baseline(id, w);
                if !learned {
                    self.clauses[id.0 as usize].weight = w as f64;
                }
            }
        }
        if !learned {
            return;
        }
        let vs: Vec<SparseVector> = ids.iter().map(|&id| self.vector(id)).collect();
        let keys = match self.cfg.mode {
            Mode::ServerModel => match self.server_scores(&vs) {
                Some(scores) => scores.into_iter().map(|s| -s).collect::<Vec<f64>>(),
                None => {
                    self.degrade();
                    return;
                }
            },
            Mode::TwoPhase | Mode::ThreePhase => {
                let fast = self.fast.expect("checked in Prover::new");
                self.stats.fast_calls += vs.len();
                let (threshold, penalty, cap) = (
                    self.cfg.two_phase_threshold,
                    self.cfg.penalty_weight,
                    self.cfg.query_cap,
                );
                let out = if self.server_down {
                    two_phase_evaluate::<ClientError>(&vs, fast, threshold, penalty, cap, &mut |_| {
                        Err(ClientError::Protocol("server unavailable".into()))
                    })
                } else {
                    let context = self.context();
                    let t0 = Instant::now();
                    let client = self.client.as_mut().expect("client exists while the server is up");
                    let out = two_phase_evaluate(&vs, fast, threshold, penalty, cap, &mut |batch| {
                        client.score(batch, context.clone())
                    });
                    self.stats.server_seconds += t0.elapsed().as_secs_f64();
                    self.stats.server_calls += out.server_calls;
                    if out.fell_back {
                        log::warn!("evaluation server failed; using fast scores from now on");
                        self.server_failed();
                    }
                    out
                };
                self.stats.penalized += out.penalized;
                out.keys
            }
            _ => {
                let fast = self.fast.expect("learned queue needs the fast model");
                self.stats.fast_calls += vs.len();
                fast.score_all(&vs).into_iter().map(|s| -s).collect()
            }
        };
        for (&id, key) in ids.iter().zip(keys) {
            self.queues.push_learned(id, key);
            self.clauses[id.0 as usize].weight = key;
        }
    }

    /// Most recent processed ids, oldest first.
    fn context(&self) -> Vec<u64> {
        let n = self.processed_order.len();
        self.processed_order[n.saturating_sub(self.cfg.context_cap)..]
            .iter()
            .map(|id| id.0 as u64)
            .collect()
    }

    fn server_scores(&mut self, vs: &[SparseVector]) -> Option<Vec<f64>> {
        if self.server_down {
            return None;
        }
        let context = self.context();
        let t0 = Instant::now();
        let mut scores = Vec::with_capacity(vs.len());
        let mut ok = true;
        for chunk in vs.chunks(self.cfg.query_cap) {
            self.stats.server_calls += 1;
            let client = self.client.as_mut().expect("client exists while the server is up");
            match client.score(chunk, context.clone()) {
                Ok(s) => scores.extend(s),
                Err(e) => {
                    log::warn!("evaluation server failed: {e}");
                    ok = false;
                    break;
                }
            }
        }
        self.stats.server_seconds += t0.elapsed().as_secs_f64();
        if ok {
            Some(scores)
        } else {
            self.server_failed();
            None
        }
    }

    fn server_failed(&mut self) {
        if !self.server_down {
            self.server_down = true;
            self.stats.server_failures += 1;
        }
        self.client = None;
        if self.cfg.mode == Mode::ServerModel {
            self.degrade();
        }
    }

    /// Switches the rest of the run to the baseline queue, moving every
    /// unprocessed clause there.
    fn degrade(&mut self) {
        if self.stats.degraded {
            return;
        }
        self.stats.degraded = true;
        let waiting: Vec<ClauseId> = (0..self.place.len())
            .filter(|&k| self.place[k] == Place::Unprocessed)
            .map(|k| ClauseId(k as u32))
            .collect();
        for id in waiting {
            let w = self.baseline_weight(id);
            self.queues.push_baseline(id, w);
            self.clauses[id.0 as usize].weight = w as f64;
        }
    }

    fn finish(mut self, empty: Option<ClauseId>) -> SolveResult {
        self.stats.seconds = self.started.elapsed().as_secs_f64();
        let mut trace = DerivationTrace::new();
        for (c, p) in self.clauses.iter().zip(&self.place) {
            let mut r = TraceRecord::from_clause(c);
            r.processed = *p == Place::Processed;
            trace.push(r);
        }
        let status = match empty {
            Some(id) => {
                let ids = trace_ancestors(&trace, id);
                for r in &mut trace.records {
                    r.in_proof = ids.contains(&r.id);
                }
                Status::Unsat(extract_proof_from(&trace, &ids))
            }
            None if self.freezer.is_empty() && self.queue_is_empty() && !self.limited() => Status::Saturated,
            None => Status::ResourceOut,
        };
        SolveResult {
            status,
            trace,
            stats: self.stats,
            processed_order: self.processed_order,
        }
    }

    fn queue_is_empty(&self) -> bool {
        !self.place.contains(&Place::Unprocessed)
    }

    fn limited(&self) -> bool {
        self.limits.max_processed.is_some_and(|m| self.stats.processed >= m)
            || self.limits.max_generated.is_some_and(|m| self.stats.generated >= m)
            || self.out_of_time()
    }
}

fn trace_ancestors(trace: &DerivationTrace, root: ClauseId) -> HashSet<ClauseId> {
    let mut seen = HashSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            if let Some(r) = trace.get(id) {
                stack.extend(r.parents.iter().copied());
            }
        }
    }
    seen
}

fn extract_proof_from(trace: &DerivationTrace, ids: &HashSet<ClauseId>) -> ProofObject {
    ProofObject {
        steps: trace.records.iter().filter(|r| ids.contains(&r.id)).cloned().collect(),
    }
}
