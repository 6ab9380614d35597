//! Hypothesis-level sequentially rejective graphs.
//!
//! Each hypothesis is a vertex carrying a weight `w_j`; hypothesis `j` is
//! rejected when `p_j ≤ w_j · α`. After a rejection the graph is updated:
//!
//! ```text
//! w_l  <- w_l + w_j · g_jl
//! g_lk <- (g_lk + g_lj · g_jk) / (1 - g_lj · g_jl)    (0 if the denominator vanishes)
//! ```
//!
//! for all remaining `l != k`. The final rejection set does not depend on
//! which eligible hypothesis is rejected first. This module is deliberately
//! independent of [`crate::engine`] and serves as a cross-check for it.
//!
//! Edges may be infinitesimal: an entry `(j, k)` in `epsilon_edges` turns
//! `transitions[j][k] = c` into `c · ε`, and the ordinary entries of row `j`
//! are scaled by `1 - s_j ε`, where `s_j` is the sum of the row's `ε`
//! coefficients. Row sums are checked on ordinary entries only.

mod series;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use series::Eps;

const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisGraph {
    pub alpha: f64,
    pub hypotheses: Vec<String>,
    pub weights: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
    /// 0-based `[from, to]` pairs whose coefficient is infinitesimal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon_edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphIssue {
    AlphaOutOfRange(f64),
    DuplicateLabel(String),
    WeightCount { expected: usize, found: usize },
    WeightOutOfRange { hypothesis: String, weight: f64 },
    WeightSum(f64),
    MatrixShape,
    CoefficientOutOfRange { from: usize, to: usize, g: f64 },
    NonZeroDiagonal(usize),
    RowSum { from: usize, sum: f64 },
    BadEpsilonEdge([usize; 2]),
}

impl fmt::Display for GraphIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphIssue::AlphaOutOfRange(a) => write!(f, "alpha {a} is outside [0, 1]"),
            GraphIssue::DuplicateLabel(l) => write!(f, "hypothesis {l} is listed twice"),
            GraphIssue::WeightCount { expected, found } => {
                write!(f, "expected {expected} weights, found {found}")
            }
            GraphIssue::WeightOutOfRange { hypothesis, weight } => {
                write!(f, "weight {weight} of {hypothesis} is outside [0, 1]")
            }
            GraphIssue::WeightSum(s) => write!(f, "weights sum to {s} > 1"),
            GraphIssue::MatrixShape => write!(f, "transition matrix must be square over the hypotheses"),
            GraphIssue::CoefficientOutOfRange { from, to, g } => {
                write!(f, "coefficient [{from}][{to}] = {g} is outside [0, 1]")
            }
            GraphIssue::NonZeroDiagonal(j) => write!(f, "diagonal entry [{j}][{j}] must be 0"),
            GraphIssue::RowSum { from, sum } => write!(f, "row {from} sums to {sum} > 1"),
            GraphIssue::BadEpsilonEdge([j, k]) => write!(f, "epsilon edge [{j}, {k}] is invalid"),
        }
    }
}

#[derive(Debug, Error)]
pub enum BretzError {
    #[error("invalid hypothesis graph: {}", join(.0))]
    Invalid(Vec<GraphIssue>),
    #[error("missing p-value for hypothesis {0}")]
    MissingPValue(String),
    #[error("p-value given for unknown hypothesis {0}")]
    UnknownHypothesis(String),
    #[error("p-value {value} for {label} is outside [0, 1]")]
    PValueOutOfRange { label: String, value: f64 },
    #[error("case weights must be nonnegative and sum to 1, got {r1} and {r2}")]
    CaseWeights { r1: f64, r2: f64 },
    #[error("truncation parameter {0} must lie in [0, 1)")]
    Gamma(f64),
    #[error("malformed graph JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn join(issues: &[GraphIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One rejection of a traced run: the rejected hypothesis and the limit
/// weights of all hypotheses right after the update.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionStep {
    pub hypothesis: usize,
    pub weights: Vec<f64>,
}

impl HypothesisGraph {
    pub fn from_json(text: &str) -> Result<Self, BretzError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialises")
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn validate(&self) -> Vec<GraphIssue> {
        let n = self.hypotheses.len();
        let mut issues = Vec::new();
        if !(0.0..=1.0).contains(&self.alpha) {
            issues.push(GraphIssue::AlphaOutOfRange(self.alpha));
        }
        let mut seen = HashSet::new();
        for label in &self.hypotheses {
            if !seen.insert(label) {
                issues.push(GraphIssue::DuplicateLabel(label.clone()));
            }
        }
        if self.weights.len() != n {
            issues.push(GraphIssue::WeightCount { expected: n, found: self.weights.len() });
        }
        for (label, &w) in self.hypotheses.iter().zip(&self.weights) {
            if !(0.0..=1.0).contains(&w) {
                issues.push(GraphIssue::WeightOutOfRange { hypothesis: label.clone(), weight: w });
            }
        }
        let sum: f64 = self.weights.iter().sum();
        if sum > 1.0 + SLACK {
            issues.push(GraphIssue::WeightSum(sum));
        }
        if self.transitions.len() != n || self.transitions.iter().any(|row| row.len() != n) {
            issues.push(GraphIssue::MatrixShape);
            return issues;
        }
        let mut eps = HashSet::new();
        for &[j, k] in &self.epsilon_edges {
            if j >= n || k >= n || j == k || !eps.insert((j, k)) {
                issues.push(GraphIssue::BadEpsilonEdge([j, k]));
            }
        }
        for (j, row) in self.transitions.iter().enumerate() {
            let mut sum = 0.0;
            for (k, &g) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&g) {
                    issues.push(GraphIssue::CoefficientOutOfRange { from: j, to: k, g });
                }
                if j == k && g != 0.0 {
                    issues.push(GraphIssue::NonZeroDiagonal(j));
                }
                if !eps.contains(&(j, k)) {
                    sum += g;
                }
            }
            if sum > 1.0 + SLACK {
                issues.push(GraphIssue::RowSum { from: j, sum });
            }
        }
        issues
    }

    fn series(&self) -> (Vec<Eps>, Vec<Vec<Eps>>) {
        let n = self.len();
        let weights = self.weights.iter().map(|&w| Eps::constant(w)).collect();
        let mut g = vec![vec![Eps::ZERO; n]; n];
        for (j, row) in self.transitions.iter().enumerate() {
            let is_eps = |k: usize| self.epsilon_edges.contains(&[j, k]);
            let eps_mass: f64 = (0..n).filter(|&k| is_eps(k)).map(|k| row[k]).sum();
            let scale = Eps::ONE - Eps::infinitesimal(eps_mass);
            for (k, &value) in row.iter().enumerate() {
                g[j][k] = if is_eps(k) {
                    Eps::infinitesimal(value)
                } else {
                    Eps::constant(value) * scale
                };
            }
        }
        (weights, g)
    }

    fn indexed(&self, pvalues: &BTreeMap<String, f64>) -> Result<Vec<f64>, BretzError> {
        if let Some(extra) = pvalues.keys().find(|k| !self.hypotheses.contains(k)) {
            return Err(BretzError::UnknownHypothesis(extra.clone()));
        }
        self.hypotheses
            .iter()
            .map(|label| match pvalues.get(label) {
                None => Err(BretzError::MissingPValue(label.clone())),
                Some(&value) if !(0.0..=1.0).contains(&value) => {
                    Err(BretzError::PValueOutOfRange { label: label.clone(), value })
                }
                Some(&value) => Ok(value),
            })
            .collect()
    }

    /// Runs the sequentially rejective procedure; returns rejected labels.
    pub fn run(&self, pvalues: &BTreeMap<String, f64>) -> Result<BTreeSet<String>, BretzError> {
        let issues = self.validate();
        if !issues.is_empty() {
            return Err(BretzError::Invalid(issues));
        }
        let p = self.indexed(pvalues)?;
        let rejected = self.run_indexed(&p);
        Ok(self
            .hypotheses
            .iter()
            .zip(rejected)
            .filter(|(_, r)| *r)
            .map(|(l, _)| l.clone())
            .collect())
    }

    /// Runs on p-values in hypothesis order, rejecting the first eligible
    /// hypothesis each round. The graph must be valid.
    pub fn run_indexed(&self, p: &[f64]) -> Vec<bool> {
        self.run_with(p, |_| 0, |_| {})
    }

    /// Full trace of a run, for checking weight conservation.
    pub fn run_traced(&self, p: &[f64]) -> Vec<RejectionStep> {
        let mut trace = Vec::new();
        self.run_with(p, |_| 0, |step| trace.push(step));
        trace
    }

    /// Every final rejection set reachable by some choice order of eligible
    /// hypotheses. Exponential; meant for small graphs.
    pub fn all_orders(&self, p: &[f64]) -> BTreeSet<Vec<bool>> {
        let (weights, g) = self.series();
        let mut out = BTreeSet::new();
        let active = vec![true; self.len()];
        self.explore(p, active, weights, g, &mut out);
        out
    }

    fn explore(
        &self,
        p: &[f64],
        active: Vec<bool>,
        weights: Vec<Eps>,
        g: Vec<Vec<Eps>>,
        out: &mut BTreeSet<Vec<bool>>,
    ) {
        let eligible = self.eligible(p, &active, &weights);
        if eligible.is_empty() {
            out.insert(active.iter().map(|a| !a).collect());
            return;
        }
        for j in eligible {
            let (mut a, mut w, mut gg) = (active.clone(), weights.clone(), g.clone());
            reject(j, &mut a, &mut w, &mut gg);
            self.explore(p, a, w, gg, out);
        }
    }

    fn eligible(&self, p: &[f64], active: &[bool], weights: &[Eps]) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| active[j] && p[j] <= self.alpha * weights[j].limit().max(0.0))
            .collect()
    }

    /// `choose` picks a position in the list of eligible hypotheses.
    pub fn run_with(
        &self,
        p: &[f64],
        mut choose: impl FnMut(&[usize]) -> usize,
        mut on_step: impl FnMut(RejectionStep),
    ) -> Vec<bool> {
        let (mut weights, mut g) = self.series();
        let mut active = vec![true; self.len()];
        loop {
            let eligible = self.eligible(p, &active, &weights);
            if eligible.is_empty() {
                break;
            }
            let j = eligible[choose(&eligible).min(eligible.len() - 1)];
            reject(j, &mut active, &mut weights, &mut g);
            on_step(RejectionStep { hypothesis: j, weights: weights.iter().map(|w| w.limit()).collect() });
        }
        active.iter().map(|a| !a).collect()
    }
}

fn reject(j: usize, active: &mut [bool], weights: &mut [Eps], g: &mut [Vec<Eps>]) {
    let n = active.len();
    active[j] = false;
    let wj = weights[j];
    for l in 0..n {
        if active[l] {
            weights[l] = weights[l] + wj * g[j][l];
        }
    }
    weights[j] = Eps::ZERO;

    let mut next = vec![vec![Eps::ZERO; n]; n];
    for l in (0..n).filter(|&l| active[l]) {
        for k in (0..n).filter(|&k| active[k] && k != l) {
            let den = Eps::ONE - g[l][j] * g[j][l];
            next[l][k] = (g[l][k] + g[l][j] * g[j][k]).checked_div(den).unwrap_or(Eps::ZERO);
        }
    }
    for (row, new_row) in g.iter_mut().zip(next) {
        *row = new_row;
    }
}

/// Hypothesis-level encodings of standard gatekeeping structures, each
/// paired with a family-based counterpart in [`crate::catalog`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseGraph {
    /// `H1`, `H2` at α/2 each pass to `H3`, `H4`, which Holm-share between
    /// themselves. Counterpart: [`crate::catalog::bonferroni_pair_to_holm`].
    BonferroniPairToHolm,
    /// Holm on `H1`, `H2`; `H3` reachable only through ε edges.
    /// Counterpart: [`crate::catalog::serial_pair_to_single`].
    SerialPairToSingle,
    /// Holm on `H1`, `H2`; `H3`, `H4` reachable through ε edges split
    /// `r1 : r2`, then weighted Holm. Counterpart:
    /// [`crate::catalog::serial_pair_to_weighted_pair`].
    SerialPairToWeightedPair { r1: f64, r2: f64 },
    /// Truncated Holm on `H1`, `H2` as a parallel gatekeeper for Holm on
    /// `H3`, `H4`. Counterpart: [`crate::catalog::truncated_holm_gatekeeper`].
    TruncatedHolmGatekeeper { gamma: f64 },
}

pub fn expand_case_graph(case: CaseGraph, alpha: f64) -> Result<HypothesisGraph, BretzError> {
    let labels = |n: usize| (1..=n).map(|k| format!("H{k}")).collect::<Vec<_>>();
    let graph = match case {
        CaseGraph::BonferroniPairToHolm => HypothesisGraph {
            alpha,
            hypotheses: labels(4),
            weights: vec![0.5, 0.5, 0.0, 0.0],
            transitions: vec![
                vec![0.0, 0.0, 0.5, 0.5],
                vec![0.0, 0.0, 0.5, 0.5],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            epsilon_edges: vec![],
        },
        CaseGraph::SerialPairToSingle => HypothesisGraph {
            alpha,
            hypotheses: labels(3),
            weights: vec![0.5, 0.5, 0.0],
            transitions: vec![
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0],
            ],
            epsilon_edges: vec![[0, 2], [1, 2]],
        },
        CaseGraph::SerialPairToWeightedPair { r1, r2 } => {
            if !(r1 >= 0.0 && r2 >= 0.0 && (r1 + r2 - 1.0).abs() <= SLACK) {
                return Err(BretzError::CaseWeights { r1, r2 });
            }
            HypothesisGraph {
                alpha,
                hypotheses: labels(4),
                weights: vec![0.5, 0.5, 0.0, 0.0],
                transitions: vec![
                    vec![0.0, 1.0, r1, r2],
                    vec![1.0, 0.0, r1, r2],
                    vec![0.0, 0.0, 0.0, 1.0],
                    vec![0.0, 0.0, 1.0, 0.0],
                ],
                epsilon_edges: vec![[0, 2], [0, 3], [1, 2], [1, 3]],
            }
        }
        CaseGraph::TruncatedHolmGatekeeper { gamma } => {
            if !(0.0..1.0).contains(&gamma) {
                return Err(BretzError::Gamma(gamma));
            }
            let pass = (1.0 - gamma) / 2.0;
            HypothesisGraph {
                alpha,
                hypotheses: labels(4),
                weights: vec![0.5, 0.5, 0.0, 0.0],
                transitions: vec![
                    vec![0.0, gamma, pass, pass],
                    vec![gamma, 0.0, pass, pass],
                    vec![0.0, 0.0, 0.0, 1.0],
                    vec![0.0, 0.0, 1.0, 0.0],
                ],
                epsilon_edges: vec![],
            }
        }
    };
    let issues = graph.validate();
    if !issues.is_empty() {
        return Err(BretzError::Invalid(issues));
    }
    Ok(graph)
}
