//! Reference strategies used by the tests, the acceptance suite and the
//! README walkthrough.

use std::collections::BTreeMap;

use crate::graph::{FamilySpec, GraphSpec, TransitionCoefficients};
use crate::procedures::LocalProcedureSpec;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn chain3(initial: [f64; 3], procs: [LocalProcedureSpec; 3]) -> Vec<Vec<FamilySpec>> {
    procs
        .into_iter()
        .enumerate()
        .map(|(i, proc)| {
            let id = format!("F{}", i + 1);
            vec![FamilySpec::new(&*id, labels(&format!("H{}", i + 1), 3), initial[i], proc)]
        })
        .collect()
}

/// Three families of three hypotheses each, one per layer. The first two use
/// truncated Holm, the last plain Holm. All of α starts at `F1` and flows
/// down the chain with coefficient 1.
pub fn parallel_chain(alpha: f64, gamma: f64) -> GraphSpec {
    GraphSpec {
        alpha,
        layers: chain3(
            [alpha, 0.0, 0.0],
            [
                LocalProcedureSpec::truncated_holm(gamma),
                LocalProcedureSpec::truncated_holm(gamma),
                LocalProcedureSpec::holm(),
            ],
        ),
        transitions: TransitionCoefficients::new().with("F1", "F2", 1.0).with("F2", "F3", 1.0),
    }
}

/// Like [`parallel_chain`] but with initial values `4α/5, α/10, α/10` and
/// `F1` splitting its remainder 0.8 / 0.2 between `F2` and `F3`.
pub fn split_parallel_chain(alpha: f64, gamma: f64) -> GraphSpec {
    split_chain_with(
        alpha,
        [
            LocalProcedureSpec::truncated_holm(gamma),
            LocalProcedureSpec::truncated_holm(gamma),
            LocalProcedureSpec::holm(),
        ],
    )
}

fn split_chain_with(alpha: f64, procs: [LocalProcedureSpec; 3]) -> GraphSpec {
    GraphSpec {
        alpha,
        layers: chain3([4.0 * alpha / 5.0, alpha / 10.0, alpha / 10.0], procs),
        transitions: TransitionCoefficients::new()
            .with("F1", "F2", 0.8)
            .with("F1", "F3", 0.2)
            .with("F2", "F3", 1.0),
    }
}

/// Diabetes trial, secondary endpoints equally important: `F1` (primary) in
/// the first layer, `F2` and `F3` side by side in the second. Fixed-sequence
/// tests in dose order, initial values 0.04 / 0.005 / 0.005, `F1` splits its
/// remainder equally.
pub fn diabetes_co_secondary() -> GraphSpec {
    let fam = |i: usize, alpha: f64| {
        let hyps = labels(&format!("H{i}"), 3);
        FamilySpec::new(
            format!("F{i}"),
            hyps.clone(),
            alpha,
            LocalProcedureSpec::fixed_sequence(hyps),
        )
    };
    GraphSpec {
        alpha: 0.05,
        layers: vec![vec![fam(1, 0.04)], vec![fam(2, 0.005), fam(3, 0.005)]],
        transitions: TransitionCoefficients::new().with("F1", "F2", 0.5).with("F1", "F3", 0.5),
    }
}

/// Diabetes trial, `S1` ranked above `S2`: the split chain at α = 0.05 with
/// truncated Hochberg (γ = 0.5) on `F1`, `F2` and Hochberg on `F3`.
pub fn diabetes_ordered_secondary() -> GraphSpec {
    split_chain_with(
        0.05,
        [
            LocalProcedureSpec::truncated_hochberg(0.5),
            LocalProcedureSpec::truncated_hochberg(0.5),
            LocalProcedureSpec::hochberg(),
        ],
    )
}

/// Raw p-values of the diabetes trial.
pub fn diabetes_pvalues() -> BTreeMap<String, f64> {
    [
        ("H11", 0.005),
        ("H12", 0.011),
        ("H13", 0.018),
        ("H21", 0.009),
        ("H22", 0.026),
        ("H23", 0.013),
        ("H31", 0.010),
        ("H32", 0.006),
        ("H33", 0.051),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// `H1` and `H2` tested by Bonferroni at α/2 each in their own families;
/// `{H3, H4}` receives whatever they release and is tested by Holm.
pub fn bonferroni_pair_to_holm(alpha: f64) -> GraphSpec {
    GraphSpec {
        alpha,
        layers: vec![
            vec![
                FamilySpec::new("F11", ["H1"], alpha / 2.0, LocalProcedureSpec::bonferroni()),
                FamilySpec::new("F12", ["H2"], alpha / 2.0, LocalProcedureSpec::bonferroni()),
            ],
            vec![FamilySpec::new("F21", ["H3", "H4"], 0.0, LocalProcedureSpec::holm())],
        ],
        transitions: TransitionCoefficients::new().with("F11", "F21", 1.0).with("F12", "F21", 1.0),
    }
}

/// `{H1, H2}` by Holm at α; `H3` is tested only when both are rejected.
pub fn serial_pair_to_single(alpha: f64) -> GraphSpec {
    GraphSpec {
        alpha,
        layers: vec![
            vec![FamilySpec::new("F1", ["H1", "H2"], alpha, LocalProcedureSpec::holm())],
            vec![FamilySpec::new("F2", ["H3"], 0.0, LocalProcedureSpec::bonferroni())],
        ],
        transitions: TransitionCoefficients::new().with("F1", "F2", 1.0),
    }
}

/// `{H1, H2}` by Holm at α; when both are rejected `{H3, H4}` is tested by
/// weighted Holm with weights `r1`, `r2`.
pub fn serial_pair_to_weighted_pair(alpha: f64, r1: f64, r2: f64) -> GraphSpec {
    GraphSpec {
        alpha,
        layers: vec![
            vec![FamilySpec::new("F1", ["H1", "H2"], alpha, LocalProcedureSpec::holm())],
            vec![FamilySpec::new(
                "F2",
                ["H3", "H4"],
                0.0,
                LocalProcedureSpec::holm().with_weights(vec![r1, r2]),
            )],
        ],
        transitions: TransitionCoefficients::new().with("F1", "F2", 1.0),
    }
}

/// Two-family parallel gatekeeper: `{H1, H2}` by truncated Holm at α passes
/// its remainder to `{H3, H4}`, tested by Holm.
pub fn truncated_holm_gatekeeper(alpha: f64, gamma: f64) -> GraphSpec {
    GraphSpec {
        alpha,
        layers: vec![
            vec![FamilySpec::new("F1", ["H1", "H2"], alpha, LocalProcedureSpec::truncated_holm(gamma))],
            vec![FamilySpec::new("F2", ["H3", "H4"], 0.0, LocalProcedureSpec::holm())],
        ],
        transitions: TransitionCoefficients::new().with("F1", "F2", 1.0),
    }
}

/// A chain of `n` single-family layers, each family of the given sizes, with
/// all of α at the first family and coefficient 1 between consecutive layers.
pub fn serial_chain(alpha: f64, sizes: &[usize], procedure: impl Fn(&[String]) -> LocalProcedureSpec) -> GraphSpec {
    let mut layers = Vec::new();
    let mut transitions = TransitionCoefficients::new();
    for (i, &size) in sizes.iter().enumerate() {
        let hyps = labels(&format!("H{}_", i + 1), size);
        let proc = procedure(&hyps);
        let initial = if i == 0 { alpha } else { 0.0 };
        layers.push(vec![FamilySpec::new(format!("F{}", i + 1), hyps, initial, proc)]);
        if i > 0 {
            transitions.insert(&format!("F{i}"), &format!("F{}", i + 1), 1.0);
        }
    }
    GraphSpec { alpha, layers, transitions }
}
