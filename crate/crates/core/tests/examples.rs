//! Worked examples with hand-computed expected values, one test per example.

mod common;

use std::collections::BTreeMap;

use gatekeep::bretz::{expand_case_graph, CaseGraph, HypothesisGraph};
use gatekeep::catalog;
use gatekeep::cli::parse_pvalues;
use gatekeep::engine::{replay, Decision, Engine, ReplayMismatch, TestReport};
use gatekeep::graph::{FamilySpec, GraphSpec, TransitionCoefficients, Violation};
use gatekeep::mcsim::{simulate_fwer, sweep, SimConfig};
use gatekeep::procedures::{FamilyTestInput, LocalProcedure, LocalProcedureSpec, ProcedureKind};

use common::data;

fn decisions(report: &TestReport) -> String {
    report.decisions.values().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn single(id: &str, hyps: &[&str], alpha: f64, proc: LocalProcedureSpec) -> Vec<FamilySpec> {
    vec![FamilySpec::new(id, hyps.iter().copied(), alpha, proc)]
}

#[test]
fn split_chain_spec_is_valid() {
    let spec = catalog::split_parallel_chain(0.05, 0.5);
    let alphas: Vec<f64> = spec.families().map(|(_, f)| f.alpha).collect();
    assert_eq!(alphas, vec![0.04, 0.005, 0.005]);
    assert!(spec.validate().is_ok());
}

#[test]
fn backward_edge_is_rejected() {
    let mut spec = catalog::parallel_chain(0.05, 0.5);
    spec.transitions.insert("F2", "F1", 0.5);
    let outcome = spec.validate();
    assert!(outcome.violations.iter().any(|v| matches!(v, Violation::BackwardEdge { from, to, .. } if from == "F2" && to == "F1")));
    assert!(outcome.to_string().contains("g must be 0 if i >= k"));
}

#[test]
fn row_sum_above_one_is_rejected() {
    let spec = GraphSpec {
        alpha: 0.05,
        layers: vec![
            single("F1", &["H1"], 0.05, LocalProcedureSpec::bonferroni()),
            vec![
                FamilySpec::new("F2", ["H2"], 0.0, LocalProcedureSpec::bonferroni()),
                FamilySpec::new("F3", ["H3"], 0.0, LocalProcedureSpec::bonferroni()),
            ],
        ],
        transitions: TransitionCoefficients::new().with("F1", "F2", 0.7).with("F1", "F3", 0.4),
    };
    assert!(spec.validate().to_string().contains("row sum 1.1 > 1"));
}

#[test]
fn dot_for_both_chain_specs() {
    let a = catalog::parallel_chain(0.05, 0.5).to_dot().unwrap();
    assert_eq!(a.matches("[label=\"F").count(), 3);
    assert_eq!(a.matches(" -> ").count(), 2);
    assert_eq!(a.matches("[label=\"1\"]").count(), 2);
    let b = catalog::split_parallel_chain(0.05, 0.5).to_dot().unwrap();
    assert_eq!(b.matches(" -> ").count(), 3);
    for g in ["0.8", "0.2", "1"] {
        assert!(b.contains(&format!("[label=\"{g}\"]")));
    }
    assert_eq!(b, catalog::split_parallel_chain(0.05, 0.5).to_dot().unwrap());
}

#[test]
fn local_procedure_examples() {
    let fs = LocalProcedure::FixedSequence { order: vec![0, 1, 2] };
    let got = fs.test_family(FamilyTestInput { pvalues: &[0.009, 0.026, 0.013], level: 0.025 }).unwrap();
    assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![0]);

    let th = LocalProcedure::TruncatedHochberg { gamma: 0.5 };
    let got = th.test_family(FamilyTestInput { pvalues: &[0.005, 0.011, 0.018], level: 0.04 }).unwrap();
    assert_eq!(got.len(), 3);

    let h = LocalProcedure::Hochberg;
    let got = h.test_family(FamilyTestInput { pvalues: &[0.010, 0.006, 0.051], level: 0.025333 }).unwrap();
    assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![0, 1]);
}

#[test]
fn zero_level_rejects_nothing_for_every_kind() {
    for kind in ProcedureKind::ALL {
        let spec = match kind {
            ProcedureKind::Bonferroni => LocalProcedureSpec::bonferroni(),
            ProcedureKind::Holm => LocalProcedureSpec::holm(),
            ProcedureKind::Hochberg => LocalProcedureSpec::hochberg(),
            ProcedureKind::TruncatedHolm => LocalProcedureSpec::truncated_holm(0.5),
            ProcedureKind::TruncatedHochberg => LocalProcedureSpec::truncated_hochberg(0.5),
            ProcedureKind::FixedSequence => LocalProcedureSpec::fixed_sequence(["A", "B"]),
        };
        let proc = spec.resolve(&["A".into(), "B".into()]).unwrap();
        let got = proc.test_family(FamilyTestInput { pvalues: &[0.0, 0.0], level: 0.0 }).unwrap();
        assert!(got.is_empty(), "{kind}");
    }
}

#[test]
fn error_rate_bound_examples() {
    let holm = LocalProcedure::Holm { weights: None };
    assert_eq!(holm.error_rate_bound(&[2], 3, 0.03).unwrap(), 0.03);
    let bonf = LocalProcedure::Bonferroni { weights: None };
    assert_eq!(bonf.error_rate_bound(&[0], 1, 0.025).unwrap(), 0.025);
    for proc in [holm, bonf, LocalProcedure::Hochberg, LocalProcedure::TruncatedHolm { gamma: 0.3 }] {
        assert_eq!(proc.error_rate_bound(&[], 3, 0.05).unwrap(), 0.0);
    }
    let th = LocalProcedure::TruncatedHochberg { gamma: 0.5 };
    assert!((th.error_rate_bound(&[1], 3, 0.037).unwrap() - 0.0246667).abs() < 1e-7);
}

#[test]
fn co_secondary_decisions() {
    let report = gatekeep::run(&catalog::diabetes_co_secondary(), &catalog::diabetes_pvalues()).unwrap();
    assert_eq!(decisions(&report), "S,S,S,S,NS,NS,S,S,NS");
    assert!(close(report.outcome("F2").unwrap().level, 0.025));
    assert!(close(report.outcome("F3").unwrap().level, 0.025));
}

#[test]
fn ordered_secondary_levels_and_decisions() {
    let report = gatekeep::run(&catalog::diabetes_ordered_secondary(), &catalog::diabetes_pvalues()).unwrap();
    let f1 = report.outcome("F1").unwrap();
    assert_eq!(f1.rejected.len(), 3);
    assert!(close(f1.transfers[0].amount + 0.005, 0.037));
    assert!(close(f1.transfers[1].amount + 0.005, 0.013));
    let f2 = report.outcome("F2").unwrap();
    assert!(close(f2.level, 0.037));
    assert_eq!(f2.rejected, vec!["H21", "H23"]);
    assert!(close(f2.e_star, 0.037 * (0.5 + 0.5 / 3.0)));
    assert!((f2.e_star - 0.024667).abs() < 1e-6);
    assert!((f2.transfers[0].amount - 0.012333).abs() < 1e-6);
    let f3 = report.outcome("F3").unwrap();
    assert!((f3.level - 0.025333).abs() < 1e-6);
    assert_eq!(f3.rejected, vec!["H31", "H32"]);
    assert_eq!(decisions(&report), "S,S,S,S,NS,S,S,S,NS");
}

#[test]
fn full_consumption_keeps_initial_levels() {
    let spec = GraphSpec {
        alpha: 0.05,
        layers: vec![
            single("F1", &["H1", "H2"], 0.03, LocalProcedureSpec::holm()),
            single("F2", &["H3"], 0.02, LocalProcedureSpec::bonferroni()),
        ],
        transitions: TransitionCoefficients::new().with("F1", "F2", 1.0),
    };
    let pv: BTreeMap<String, f64> = [("H1", 0.5), ("H2", 0.9), ("H3", 0.5)].map(|(k, v)| (k.to_string(), v)).into();
    let engine = Engine::new(&spec).unwrap();
    let (outcome, state) = engine.step(&engine.initial_state(), "F1", &pv).unwrap();
    assert_eq!(outcome.e_star, 0.03);
    assert!(outcome.transfers.iter().all(|t| t.amount == 0.0));
    assert_eq!(state.current_alpha("F2"), Some(0.02));
}

#[test]
fn bonferroni_pair_first_step() {
    let spec = catalog::bonferroni_pair_to_holm(0.05);
    let engine = Engine::new(&spec).unwrap();
    let pv: BTreeMap<String, f64> = [("H1".to_string(), 0.01)].into();
    let (outcome, state) = engine.step(&engine.initial_state(), "F11", &pv).unwrap();
    assert_eq!(outcome.rejected, vec!["H1"]);
    assert_eq!(outcome.e_star, 0.0);
    assert_eq!(outcome.transfers[0].amount, 0.025);
    assert_eq!(state.current_alpha("F21"), Some(0.025));
}

#[test]
fn layer_order_does_not_change_levels() {
    let spec = catalog::diabetes_co_secondary();
    let engine = Engine::new(&spec).unwrap();
    let pv = catalog::diabetes_pvalues();
    let (_, s) = engine.step(&engine.initial_state(), "F1", &pv).unwrap();
    let (_, a) = engine.step(&s, "F2", &pv).unwrap();
    let (_, a) = engine.step(&a, "F3", &pv).unwrap();
    let (_, b) = engine.step(&s, "F3", &pv).unwrap();
    let (_, b) = engine.step(&b, "F2", &pv).unwrap();
    assert_eq!(a.alphas(), b.alphas());
}

#[test]
fn replay_examples() {
    let spec = catalog::diabetes_co_secondary();
    let golden = TestReport::from_json(&std::fs::read_to_string(data("co_secondary_report.json")).unwrap()).unwrap();
    assert!(replay(&golden, &spec).unwrap().is_ok());
    assert_eq!(golden.decisions["H22"], Decision::NotSignificant);
    let mut bad = golden.clone();
    bad.outcomes[0].transfers[1].amount += 1e-6;
    let outcome = replay(&bad, &spec).unwrap();
    assert!(outcome.mismatches.iter().any(|m| matches!(m, ReplayMismatch::TransferAmount { .. })));
}

#[test]
fn oracle_examples() {
    let g = expand_case_graph(CaseGraph::BonferroniPairToHolm, 0.05).unwrap();
    let labels = g.hypotheses.clone();
    let pv = |p: [f64; 4]| labels.iter().cloned().zip(p).collect::<BTreeMap<_, _>>();
    let got = g.run(&pv([0.01, 0.04, 0.02, 0.049])).unwrap();
    assert_eq!(got.into_iter().collect::<Vec<_>>(), vec!["H1"]);
    let engine = gatekeep::run(&catalog::bonferroni_pair_to_holm(0.05), &pv([0.01, 0.04, 0.02, 0.049])).unwrap();
    assert_eq!(engine.rejected(), vec!["H1"]);
    assert!(g.run(&pv([1.0; 4])).unwrap().is_empty());

    let one = HypothesisGraph {
        alpha: 0.05,
        hypotheses: vec!["H".into()],
        weights: vec![1.0],
        transitions: vec![vec![0.0]],
        epsilon_edges: vec![],
    };
    assert_eq!(one.run(&[("H".to_string(), 0.05)].into()).unwrap().len(), 1);
}

#[test]
fn case_graph_shapes() {
    let c1 = expand_case_graph(CaseGraph::BonferroniPairToHolm, 0.05).unwrap();
    assert_eq!(c1.weights, vec![0.5, 0.5, 0.0, 0.0]);
    let c2 = expand_case_graph(CaseGraph::SerialPairToSingle, 0.05).unwrap();
    assert_eq!(c2.len(), 3);
    assert!(c2.epsilon_edges.iter().all(|e| e[1] == 2));
    let c3 = expand_case_graph(CaseGraph::SerialPairToWeightedPair { r1: 0.5, r2: 0.5 }, 0.05).unwrap();
    let last = c3.run_traced(&[0.001, 0.002, 0.9, 0.9]).pop().unwrap();
    assert_eq!(&last.weights[2..], &[0.5, 0.5]);
}

#[test]
fn simulation_examples() {
    let spec = catalog::diabetes_co_secondary();
    let truth = spec.labels().into_iter().map(|l| (l, gatekeep::mcsim::Truth::FalseNull)).collect();
    let none = SimConfig { spec, truth, model: Default::default(), reps: 5000, seed: 8 };
    assert_eq!(simulate_fwer(&none).unwrap().fwer_hat, 0.0);

    let holm = GraphSpec {
        alpha: 0.05,
        layers: vec![single("F1", &["H1", "H2", "H3"], 0.05, LocalProcedureSpec::holm())],
        transitions: TransitionCoefficients::new(),
    };
    let r = simulate_fwer(&SimConfig::global_null(holm, 100_000, 2026)).unwrap();
    assert!((r.fwer_hat - 0.04917).abs() <= 3.0 * r.se, "{r:?}");

    let b = simulate_fwer(&SimConfig::global_null(catalog::split_parallel_chain(0.05, 0.5), 100_000, 2026)).unwrap();
    assert!(b.fwer_hat <= 0.05 + 3.0 * b.se, "{b:?}");

    assert!(sweep(&[]).is_empty());
    let c = SimConfig::global_null(catalog::parallel_chain(0.05, 0.5), 1000, 3);
    let pair = sweep(&[c.clone(), c]);
    assert_eq!(pair[0].as_ref().unwrap(), pair[1].as_ref().unwrap());
}

#[test]
fn pvalue_csv_examples() {
    let text = std::fs::read_to_string(data("diabetes_pvalues.csv")).unwrap();
    assert_eq!(parse_pvalues(&text).unwrap(), catalog::diabetes_pvalues());
    assert!(parse_pvalues("hypothesis,p\n").unwrap().is_empty());
    let err = parse_pvalues("hypothesis,p\nH1,1.2\n").unwrap_err();
    assert!(err.to_string().contains("line 2") && err.to_string().contains("H1"));
}
