mod common;

use std::sync::Arc;

use common::{ground_baseline_processed, ground_problem, ground_refutable, stump, GroundClause};
use proptest::prelude::*;
use tandem::features::{FeatureConfig, PairMode, COUNT_FEATURES};
use tandem::gbdt::TreeModel;
use tandem::problem::{check_proof, parse_problem, write_trace, Problem};
use tandem::prover::{solve_with, GuidanceConfig, Limits, Mode, Models, ProverError, Status};
use tandem::server::{self, ServerConfig};

fn features() -> FeatureConfig {
    FeatureConfig {
        base: 1 << 10,
        walk_length: 3,
        count_features: true,
    }
}

fn cfg(mode: Mode) -> GuidanceConfig {
    GuidanceConfig {
        features: features(),
        ..GuidanceConfig::with_mode(mode)
    }
}

fn problem(text: &str) -> Problem {
    parse_problem(text).unwrap()
}

fn chain(n: usize) -> Vec<GroundClause> {
    let mut cs: Vec<GroundClause> = vec![vec![1]];
    for i in 1..=n as i32 {
        cs.push(vec![-i, i + 1]);
    }
    cs.push(vec![-(n as i32 + 1)]);
    cs
}

/// Prefers clauses with more negative literals.
fn negative_lover() -> TreeModel {
    let f = features();
    stump(f.dimension(), (f.base + 2) as u32, 0.5, -1.0, 1.5)
}

/// Parent-pair model on concatenated vectors: likes partners that are units.
fn unit_partner_lover() -> TreeModel {
    let f = features();
    let d = f.dimension();
    stump(2 * d, (d + f.base) as u32, 1.5, 0.8, -0.8)
}

fn budget() -> Limits {
    Limits {
        max_processed: Some(200),
        max_generated: Some(5_000),
        wall_seconds: None,
    }
}

fn run(p: &Problem, c: &GuidanceConfig, m: &Models, limits: Limits) -> tandem::prover::SolveResult {
    solve_with(p, c, m, limits).unwrap()
}

#[test]
fn one_step_refutation() {
    let p = problem("cnf(a, axiom, p(a)).\ncnf(b, negated_conjecture, ~p(X)).\n");
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::default());
    let Status::Unsat(proof) = &r.status else {
        panic!("expected unsat, got {:?}", r.status)
    };
    assert_eq!(proof.len(), 3);
    assert_eq!(r.trace.len(), 3);
    check_proof(proof, &p).unwrap();
}

#[test]
fn single_fact_saturates() {
    let p = problem("cnf(a, axiom, p(a)).\n");
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::default());
    assert_eq!(r.status, Status::Saturated);
    assert_eq!(r.stats.processed, 1);
}

#[test]
fn chain_12_matches_ground_oracle() {
    let cs = chain(12);
    let p = ground_problem("chain_12", &cs);
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::default());
    assert!(r.status.is_unsat());
    assert_eq!(Some(r.stats.processed), ground_baseline_processed(&cs));
}

#[test]
fn input_empty_clause() {
    let p = problem("cnf(a, axiom, $false).\n");
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::default());
    assert!(r.status.is_unsat());
    assert_eq!(r.stats.processed, 0);
}

#[test]
fn resource_limits() {
    let p = ground_problem("chain", &chain(30));
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::processed(5));
    assert_eq!(r.status, Status::ResourceOut);
    assert_eq!(r.stats.processed, 5);
    let limits = Limits {
        max_generated: Some(3),
        ..Limits::unlimited()
    };
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), limits);
    assert_eq!(r.status, Status::ResourceOut);
    assert!(r.stats.generated <= 3);
    assert_eq!(r.trace.len(), p.clauses.len() + r.stats.generated);
}

#[test]
fn infinite_search_hits_the_limit() {
    let p = problem("cnf(a, axiom, p(a)).\ncnf(b, axiom, ~p(X) | p(f(X))).\ncnf(c, axiom, ~q).\n");
    let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::processed(50));
    assert_eq!(r.status, Status::ResourceOut);
}

#[test]
fn missing_models_are_reported() {
    let p = problem("cnf(a, axiom, p).\n");
    let err = solve_with(&p, &cfg(Mode::LocalModel), &Models::default(), Limits::default()).unwrap_err();
    assert!(matches!(err, ProverError::Missing { .. }));
    let models = Models {
        fast: Some(Arc::new(TreeModel::constant(7, 0.0))),
        parental: None,
    };
    let err = solve_with(&p, &cfg(Mode::LocalModel), &models, Limits::default()).unwrap_err();
    assert!(matches!(err, ProverError::Dimension { .. }));
}

#[test]
fn frozen_proof_path_is_revived() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/revival.p")).unwrap();
    let p = problem(&text);
    let d = features().dimension();
    let models = Models {
        fast: None,
        parental: Some(Arc::new(TreeModel::constant(2 * d, 0.0))),
    };
    let c = GuidanceConfig {
        parental_threshold: 0.999,
        ..cfg(Mode::Parental)
    };
    let r = run(&p, &c, &models, Limits::unlimited());
    let Status::Unsat(proof) = &r.status else {
        panic!("expected unsat, got {:?}", r.status)
    };
    check_proof(proof, &p).unwrap();
    assert!(r.stats.frozen > 0);
    assert!(r.stats.revived > 0);
}

#[test]
fn everything_frozen_then_saturated() {
    // satisfiable: the freezer must be drained before saturation is claimed
    let p = problem("cnf(a, axiom, p | q).\ncnf(b, axiom, ~p | r).\ncnf(c, axiom, ~q | r).\n");
    let d = features().dimension();
    let models = Models {
        fast: None,
        parental: Some(Arc::new(TreeModel::constant(2 * d, 0.0))),
    };
    let c = GuidanceConfig {
        parental_threshold: 1.0,
        ..cfg(Mode::Parental)
    };
    let r = run(&p, &c, &models, Limits::unlimited());
    assert_eq!(r.status, Status::Saturated);
    assert_eq!(r.stats.frozen, r.stats.revived);
    assert!(r.stats.frozen > 0);
}

fn corpus() -> Vec<Problem> {
    vec![
        ground_problem("chain_12", &chain(12)),
        problem("cnf(a, axiom, p(a)).\ncnf(b, axiom, ~p(X) | q(f(X))).\ncnf(c, axiom, ~q(f(a))).\n"),
        problem(
            "cnf(a, axiom, r(a, b)).\ncnf(b, axiom, r(b, c)).\ncnf(c, axiom, ~r(X, Y) | ~r(Y, Z) | r(X, Z)).\n\
             cnf(d, axiom, ~r(a, c)).\n",
        ),
        problem("cnf(a, axiom, p(X) | p(Y)).\ncnf(b, axiom, ~p(a) | ~p(b)).\n"),
        ground_problem("mix", &[vec![1, 2], vec![-1, 2], vec![1, -2], vec![-1, -2]]),
    ]
}

#[test]
fn parental_threshold_zero_is_no_filter() {
    let models = Models {
        fast: Some(Arc::new(negative_lover())),
        parental: Some(Arc::new(unit_partner_lover())),
    };
    for p in corpus() {
        let a = run(
            &p,
            &GuidanceConfig {
                parental_threshold: 0.0,
                ..cfg(Mode::Parental)
            },
            &models,
            budget(),
        );
        let b = run(&p, &cfg(Mode::LocalModel), &models, budget());
        assert_eq!(write_trace(&a.trace), write_trace(&b.trace), "{}", p.name);
        assert!(a.stats.parental_calls > 0 || a.stats.generated == 0);
        let no_fast = Models {
            fast: None,
            ..models.clone()
        };
        let a = run(
            &p,
            &GuidanceConfig {
                parental_threshold: 0.0,
                ..cfg(Mode::Parental)
            },
            &no_fast,
            budget(),
        );
        let b = run(&p, &cfg(Mode::Baseline), &no_fast, budget());
        assert_eq!(write_trace(&a.trace), write_trace(&b.trace), "{}", p.name);
    }
}

fn serve(model: TreeModel) -> server::ServerHandle {
    let sc = ServerConfig {
        addr: "127.0.0.1:0".into(),
        workers: 2,
        batch_size: 4,
        wait: 0.0,
        ..ServerConfig::default()
    };
    server::start(&sc, Arc::new(model)).unwrap()
}

#[test]
fn two_phase_threshold_zero_matches_server_mode() {
    let slow = stump(features().dimension(), (features().base + 3) as u32, 2.5, 1.0, -1.0);
    let handle = serve(slow);
    let addr = handle.local_addr().to_string();
    let models = Models {
        fast: Some(Arc::new(negative_lover())),
        parental: Some(Arc::new(unit_partner_lover())),
    };
    for coop in [false, true] {
        for p in corpus() {
            let with = |mode| GuidanceConfig {
                server: Some(addr.clone()),
                two_phase_threshold: 0.0,
                parental_threshold: 0.0,
                coop,
                ..cfg(mode)
            };
            let a = run(&p, &with(Mode::TwoPhase), &models, budget());
            let b = run(&p, &with(Mode::ServerModel), &models, budget());
            let c = run(&p, &with(Mode::ThreePhase), &models, budget());
            assert_eq!(a.processed_order, b.processed_order, "{}", p.name);
            assert_eq!(write_trace(&a.trace), write_trace(&c.trace), "{}", p.name);
            assert_eq!(a.stats.penalized, 0);
            assert!(a.stats.server_calls > 0);
            assert_eq!(a.stats.server_failures, 0);
        }
    }
    handle.shutdown();
}

#[test]
fn unreachable_server_degrades() {
    // bind and drop to get a port nobody listens on
    let addr = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .to_string();
    let p = ground_problem("chain_12", &chain(12));
    let models = Models {
        fast: Some(Arc::new(negative_lover())),
        parental: None,
    };
    for mode in [Mode::ServerModel, Mode::TwoPhase] {
        let c = GuidanceConfig {
            server: Some(addr.clone()),
            ..cfg(mode)
        };
        let r = run(&p, &c, &models, Limits::default());
        assert!(r.status.is_unsat(), "{mode}");
        assert_eq!(r.stats.server_failures, 1);
        assert_eq!(r.stats.degraded, mode == Mode::ServerModel);
    }
}

#[test]
fn runs_are_deterministic() {
    let models = Models {
        fast: Some(Arc::new(negative_lover())),
        parental: Some(Arc::new(unit_partner_lover())),
    };
    for p in corpus() {
        for mode in [Mode::Baseline, Mode::LocalModel, Mode::Parental] {
            let c = GuidanceConfig {
                parental_threshold: 0.5,
                coop: true,
                ..cfg(mode)
            };
            let a = run(&p, &c, &models, budget());
            let b = run(&p, &c, &models, budget());
            assert_eq!(write_trace(&a.trace), write_trace(&b.trace));
            assert_eq!(a.processed_order, b.processed_order);
        }
    }
}

#[test]
fn penalized_clauses_stay_selectable() {
    // every clause scores below the threshold, so all get the penalty weight
    let slow = TreeModel::constant(features().dimension(), 0.0);
    let handle = serve(slow);
    let models = Models {
        fast: Some(Arc::new(TreeModel::constant(features().dimension(), -2.0))),
        parental: None,
    };
    let c = GuidanceConfig {
        server: Some(handle.local_addr().to_string()),
        two_phase_threshold: 0.5,
        ..cfg(Mode::TwoPhase)
    };
    let p = ground_problem("chain_12", &chain(12));
    let r = run(&p, &c, &models, Limits::unlimited());
    assert!(r.status.is_unsat());
    assert_eq!(r.stats.server_calls, 0);
    assert!(r.stats.penalized > 0);
    handle.shutdown();
}

fn ground_cnf() -> impl Strategy<Value = Vec<GroundClause>> {
    let lit = (1i32..=5, any::<bool>()).prop_map(|(a, s)| if s { a } else { -a });
    prop::collection::vec(prop::collection::vec(lit, 1..=3), 1..=10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn baseline_agrees_with_ground_oracles(cs in ground_cnf()) {
        let p = ground_problem("random", &cs);
        let r = run(&p, &cfg(Mode::Baseline), &Models::default(), Limits::unlimited());
        prop_assert_eq!(r.status.is_unsat(), ground_refutable(&cs));
        prop_assert_eq!(r.status.is_unsat(), !common::satisfiable(&cs, 5));
        if r.status.is_unsat() {
            prop_assert_eq!(Some(r.stats.processed), ground_baseline_processed(&cs));
        } else {
            prop_assert_eq!(&r.status, &Status::Saturated);
        }
        if let Status::Unsat(proof) = &r.status {
            prop_assert!(check_proof(proof, &p).is_ok());
        }
    }

    #[test]
    fn filters_never_lose_refutations(cs in ground_cnf(), t in 0.0f64..1.0) {
        let models = Models {
            fast: Some(Arc::new(negative_lover())),
            parental: Some(Arc::new(unit_partner_lover())),
        };
        let p = ground_problem("random", &cs);
        let c = GuidanceConfig { parental_threshold: t, coop: true, ..cfg(Mode::Parental) };
        let r = run(&p, &c, &models, Limits::unlimited());
        prop_assert_eq!(r.status.is_unsat(), !common::satisfiable(&cs, 5));
        if let Status::Unsat(proof) = &r.status {
            prop_assert!(check_proof(proof, &p).is_ok());
        }
    }
}

#[test]
fn count_feature_slots_are_where_the_test_models_expect() {
    assert_eq!(COUNT_FEATURES, 6);
    let _ = PairMode::Cat;
}
