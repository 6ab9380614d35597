//! Sequential execution of a family-based graph.
//!
//! Layers are processed in order and every family of a layer is tested once,
//! in declared order, at its current critical value `α*`. After family
//! `(i, j)` is tested with accepted set `A`, every later family `(k, l)`
//! receives `(α* - e*(A)) · g_ijkl` and all coefficients out of `(i, j)` are
//! zeroed. Transfers may target any later layer, not only the next one.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphSpec, TransitionCoefficients, ValidationOutcome};
use crate::procedures::{LocalProcedure, ProcedureError};

/// Tolerance used by [`replay`] when comparing re-derived quantities.
pub const REPLAY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("spec is not valid:\n{0}")]
    InvalidSpec(ValidationOutcome),
    #[error("missing p-value for hypothesis {0}")]
    MissingPValue(String),
    #[error("p-value given for unknown hypothesis {0}")]
    UnknownHypothesis(String),
    #[error("p-value {value} for {label} is outside [0, 1]")]
    PValueOutOfRange { label: String, value: f64 },
    #[error("unknown family {0}")]
    UnknownFamily(String),
    #[error("family {family} cannot be tested now: {reason}")]
    NotEligible { family: String, reason: String },
    #[error("report does not match spec: {0}")]
    ReportMismatch(String),
    #[error(transparent)]
    Procedure(#[from] ProcedureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "S")]
    Significant,
    #[serde(rename = "NS")]
    NotSignificant,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Significant => "S",
            Decision::NotSignificant => "NS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transfer {
    pub to: String,
    pub amount: f64,
}

/// What happened when one family was tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyOutcome {
    pub family: String,
    /// Critical value `α*` the family was tested at.
    pub level: f64,
    pub rejected: Vec<String>,
    pub accepted: Vec<String>,
    pub e_star: f64,
    /// One entry per later family with a nonzero coefficient, zero amounts included.
    pub transfers: Vec<Transfer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestReport {
    /// In execution order.
    pub outcomes: Vec<FamilyOutcome>,
    pub decisions: BTreeMap<String, Decision>,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn rejected(&self) -> Vec<&str> {
        self.decisions
            .iter()
            .filter(|(_, d)| **d == Decision::Significant)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn outcome(&self, family: &str) -> Option<&FamilyOutcome> {
        self.outcomes.iter().find(|o| o.family == family)
    }
}

#[derive(Debug)]
struct CompiledFamily {
    id: String,
    layer: usize,
    initial_alpha: f64,
    /// Global hypothesis indices, contiguous.
    start: usize,
    len: usize,
    procedure: LocalProcedure,
}

/// A validated graph prepared for repeated execution.
///
/// Families are indexed in execution order (layer by layer, declared order
/// within a layer); hypotheses are indexed in the spec's declared order.
#[derive(Debug)]
pub struct Engine {
    spec: GraphSpec,
    families: Vec<CompiledFamily>,
    family_ids: Arc<[String]>,
    family_layers: Arc<[usize]>,
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    /// Dense `m × m` coefficients.
    g: Vec<f64>,
    /// Nonzero targets per family, in family order.
    targets: Vec<Vec<(usize, f64)>>,
}

impl Engine {
    pub fn new(spec: &GraphSpec) -> Result<Self, EngineError> {
        let outcome = spec.validate();
        if !outcome.is_ok() {
            return Err(EngineError::InvalidSpec(outcome));
        }
        let mut families = Vec::new();
        let mut labels = Vec::new();
        for (pos, fam) in spec.families() {
            let procedure = fam
                .resolve_procedure()
                .expect("validated spec has resolvable procedures");
            families.push(CompiledFamily {
                id: fam.id.clone(),
                layer: pos.layer,
                initial_alpha: fam.alpha,
                start: labels.len(),
                len: fam.hypotheses.len(),
                procedure,
            });
            labels.extend(fam.hypotheses.iter().cloned());
        }
        let m = families.len();
        let index: HashMap<&str, usize> =
            families.iter().enumerate().map(|(f, fam)| (fam.id.as_str(), f)).collect();
        let mut g = vec![0.0; m * m];
        for t in spec.transitions.iter() {
            g[index[t.from.as_str()] * m + index[t.to.as_str()]] += t.g;
        }
        let targets = (0..m)
            .map(|f| (0..m).filter(|&t| g[f * m + t] > 0.0).map(|t| (t, g[f * m + t])).collect())
            .collect();
        let label_index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Ok(Engine {
            spec: spec.clone(),
            family_ids: families.iter().map(|f| f.id.clone()).collect(),
            family_layers: families.iter().map(|f| f.layer).collect(),
            families,
            labels,
            label_index,
            g,
            targets,
        })
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    /// Hypothesis labels in declared order; the index order used by
    /// [`Engine::run_indexed`].
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn family_ids(&self) -> &[String] {
        &self.family_ids
    }

    /// Family index of every hypothesis, in declared order.
    pub fn hypothesis_families(&self) -> Vec<usize> {
        self.families
            .iter()
            .enumerate()
            .flat_map(|(f, fam)| std::iter::repeat_n(f, fam.len))
            .collect()
    }

    pub fn initial_state(&self) -> ExecutionState {
        ExecutionState {
            family_ids: Arc::clone(&self.family_ids),
            family_layers: Arc::clone(&self.family_layers),
            tested: vec![false; self.families.len()],
            current_alpha: self.families.iter().map(|f| f.initial_alpha).collect(),
            current_g: self.g.clone(),
        }
    }

    fn family_index(&self, id: &str) -> Result<usize, EngineError> {
        self.family_ids
            .iter()
            .position(|f| f == id)
            .ok_or_else(|| EngineError::UnknownFamily(id.to_string()))
    }

    fn indexed_pvalues(&self, pvalues: &BTreeMap<String, f64>) -> Result<Vec<f64>, EngineError> {
        if let Some(extra) = pvalues.keys().find(|k| !self.label_index.contains_key(*k)) {
            return Err(EngineError::UnknownHypothesis(extra.clone()));
        }
        self.labels
            .iter()
            .map(|label| match pvalues.get(label) {
                None => Err(EngineError::MissingPValue(label.clone())),
                Some(&value) if !(0.0..=1.0).contains(&value) => {
                    Err(EngineError::PValueOutOfRange { label: label.clone(), value })
                }
                Some(&value) => Ok(value),
            })
            .collect()
    }

    /// Tests one family. The family must be untested and in the earliest
    /// layer that still has untested families. `pvalues` must cover the
    /// family's hypotheses; other entries are ignored.
    pub fn step(
        &self,
        state: &ExecutionState,
        family: &str,
        pvalues: &BTreeMap<String, f64>,
    ) -> Result<(FamilyOutcome, ExecutionState), EngineError> {
        let f = self.family_index(family)?;
        if state.tested[f] {
            return Err(EngineError::NotEligible {
                family: family.to_string(),
                reason: "already tested".into(),
            });
        }
        let layer = self.families[f].layer;
        if let Some(next) = state.next_layer() {
            if layer != next {
                return Err(EngineError::NotEligible {
                    family: family.to_string(),
                    reason: format!("layer {next} still has untested families"),
                });
            }
        }
        let fam = &self.families[f];
        let labels = &self.labels[fam.start..fam.start + fam.len];
        let mut p = Vec::with_capacity(fam.len);
        for label in labels {
            match pvalues.get(label) {
                None => return Err(EngineError::MissingPValue(label.clone())),
                Some(&value) if !(0.0..=1.0).contains(&value) => {
                    return Err(EngineError::PValueOutOfRange { label: label.clone(), value });
                }
                Some(&value) => p.push(value),
            }
        }

        let level = state.current_alpha[f];
        let mut rejected = vec![false; fam.len];
        fam.procedure.reject_into(&p, level, &mut rejected);
        let accepted: Vec<bool> = rejected.iter().map(|r| !r).collect();
        let e_star = fam.procedure.bound_for_mask(&accepted, level);
        let remainder = level - e_star;

        let m = self.families.len();
        let mut next = state.clone();
        let mut transfers = Vec::new();
        for t in 0..m {
            let g = state.current_g[f * m + t];
            if g > 0.0 {
                let amount = remainder * g;
                next.current_alpha[t] += amount;
                transfers.push(Transfer { to: self.family_ids[t].clone(), amount });
            }
            next.current_g[f * m + t] = 0.0;
        }
        next.tested[f] = true;

        let split = |want: bool| -> Vec<String> {
            labels
                .iter()
                .zip(&rejected)
                .filter(|(_, &r)| r == want)
                .map(|(l, _)| l.clone())
                .collect()
        };
        let outcome = FamilyOutcome {
            family: fam.id.clone(),
            level,
            rejected: split(true),
            accepted: split(false),
            e_star,
            transfers,
        };
        Ok((outcome, next))
    }

    /// Runs every family in execution order and reports the full audit trail.
    pub fn run(&self, pvalues: &BTreeMap<String, f64>) -> Result<TestReport, EngineError> {
        self.indexed_pvalues(pvalues)?;
        let mut state = self.initial_state();
        let mut outcomes = Vec::with_capacity(self.families.len());
        for id in self.family_ids.iter() {
            let (outcome, next) = self.step(&state, id, pvalues)?;
            outcomes.push(outcome);
            state = next;
        }
        let mut decisions: BTreeMap<String, Decision> = self
            .labels
            .iter()
            .map(|l| (l.clone(), Decision::NotSignificant))
            .collect();
        for outcome in &outcomes {
            for label in &outcome.rejected {
                decisions.insert(label.clone(), Decision::Significant);
            }
        }
        Ok(TestReport { outcomes, decisions })
    }

    /// Same rules as [`Engine::run`] without the audit trail, for simulation.
    /// `p` is indexed like [`Engine::labels`] and must hold valid p-values;
    /// `rejected` receives the global decisions.
    pub fn run_indexed(&self, p: &[f64], rejected: &mut [bool]) {
        let mut alpha = [0.0f64; 16];
        let mut heap;
        let alpha: &mut [f64] = if self.families.len() <= alpha.len() {
            &mut alpha[..self.families.len()]
        } else {
            heap = vec![0.0; self.families.len()];
            &mut heap
        };
        self.run_indexed_with(p, rejected, alpha);
    }

    fn run_indexed_with(&self, p: &[f64], rejected: &mut [bool], alpha: &mut [f64]) {
        debug_assert_eq!(p.len(), self.labels.len());
        debug_assert_eq!(rejected.len(), self.labels.len());
        for (a, fam) in alpha.iter_mut().zip(&self.families) {
            *a = fam.initial_alpha;
        }
        for (f, fam) in self.families.iter().enumerate() {
            let range = fam.start..fam.start + fam.len;
            let level = alpha[f];
            let out = &mut rejected[range.clone()];
            fam.procedure.reject_into(&p[range], level, out);
            if self.targets[f].is_empty() {
                continue;
            }
            let e_star = bound_for_rejected(&fam.procedure, out, level);
            let remainder = level - e_star;
            for &(t, g) in &self.targets[f] {
                alpha[t] += remainder * g;
            }
        }
    }
}

fn bound_for_rejected(procedure: &LocalProcedure, rejected: &[bool], level: f64) -> f64 {
    let mut accepted = [false; 32];
    if rejected.len() <= accepted.len() {
        for (a, r) in accepted.iter_mut().zip(rejected) {
            *a = !r;
        }
        procedure.bound_for_mask(&accepted[..rejected.len()], level)
    } else {
        let accepted: Vec<bool> = rejected.iter().map(|r| !r).collect();
        procedure.bound_for_mask(&accepted, level)
    }
}

/// Snapshot of an execution: untested families, current critical values and
/// current coefficients. Stepping never mutates a state in place.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionState {
    family_ids: Arc<[String]>,
    family_layers: Arc<[usize]>,
    tested: Vec<bool>,
    current_alpha: Vec<f64>,
    current_g: Vec<f64>,
}

impl ExecutionState {
    /// Earliest layer with an untested family.
    pub fn next_layer(&self) -> Option<usize> {
        self.tested
            .iter()
            .zip(self.family_layers.iter())
            .filter(|(t, _)| !**t)
            .map(|(_, &l)| l)
            .min()
    }

    pub fn is_finished(&self) -> bool {
        self.tested.iter().all(|&t| t)
    }

    /// Untested family ids grouped by layer (1-based layer, ids in declared order).
    pub fn remaining(&self) -> BTreeMap<usize, Vec<&str>> {
        let mut out: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for (f, id) in self.family_ids.iter().enumerate() {
            if !self.tested[f] {
                out.entry(self.family_layers[f]).or_default().push(id);
            }
        }
        out
    }

    pub fn is_tested(&self, family: &str) -> Option<bool> {
        self.position(family).map(|f| self.tested[f])
    }

    pub fn current_alpha(&self, family: &str) -> Option<f64> {
        self.position(family).map(|f| self.current_alpha[f])
    }

    /// Current critical values of all families, in execution order.
    pub fn alphas(&self) -> Vec<(&str, f64)> {
        self.family_ids.iter().map(String::as_str).zip(self.current_alpha.iter().copied()).collect()
    }

    pub fn coefficient(&self, from: &str, to: &str) -> f64 {
        match (self.position(from), self.position(to)) {
            (Some(f), Some(t)) => self.current_g[f * self.family_ids.len() + t],
            _ => 0.0,
        }
    }

    /// Nonzero current coefficients.
    pub fn current_g(&self) -> TransitionCoefficients {
        let m = self.family_ids.len();
        let mut out = TransitionCoefficients::new();
        for f in 0..m {
            for t in 0..m {
                let g = self.current_g[f * m + t];
                if g != 0.0 {
                    out.insert(&self.family_ids[f], &self.family_ids[t], g);
                }
            }
        }
        out
    }

    fn position(&self, family: &str) -> Option<usize> {
        self.family_ids.iter().position(|f| f == family)
    }
}

/// Convenience wrapper: compile `spec` and run it once.
pub fn run(spec: &GraphSpec, pvalues: &BTreeMap<String, f64>) -> Result<TestReport, EngineError> {
    Engine::new(spec)?.run(pvalues)
}

/// A re-derived quantity that disagrees with the report.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplayMismatch {
    Level { family: String, reported: f64, expected: f64 },
    EStar { family: String, reported: f64, expected: f64 },
    TransferTargets { family: String, reported: Vec<String>, expected: Vec<String> },
    TransferAmount { family: String, to: String, reported: f64, expected: f64 },
    Decision { label: String, reported: Decision, expected: Decision },
}

impl fmt::Display for ReplayMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayMismatch::Level { family, reported, expected } => {
                write!(f, "{family}: level {reported} but expected {expected}")
            }
            ReplayMismatch::EStar { family, reported, expected } => {
                write!(f, "{family}: e_star {reported} but expected {expected}")
            }
            ReplayMismatch::TransferTargets { family, reported, expected } => write!(
                f,
                "{family}: transfers go to [{}] but expected [{}]",
                reported.join(", "),
                expected.join(", ")
            ),
            ReplayMismatch::TransferAmount { family, to, reported, expected } => {
                write!(f, "{family} -> {to}: transfer {reported} but expected {expected}")
            }
            ReplayMismatch::Decision { label, reported, expected } => {
                write!(f, "{label}: decision {reported} but rejection sets imply {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayOutcome {
    pub mismatches: Vec<ReplayMismatch>,
}

impl ReplayOutcome {
    pub fn is_ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for ReplayOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let lines: Vec<String> = self.mismatches.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

/// Re-derives every level, `e*` and transfer of `report` from `spec` and the
/// reported rejection sets. Structural problems (unknown or repeated
/// families, wrong order, sets that do not partition a family) are errors;
/// numeric disagreements beyond [`REPLAY_TOLERANCE`] are mismatches.
pub fn replay(report: &TestReport, spec: &GraphSpec) -> Result<ReplayOutcome, EngineError> {
    let engine = Engine::new(spec)?;
    let m = engine.families.len();
    if report.outcomes.len() != m {
        return Err(EngineError::ReportMismatch(format!(
            "report has {} family outcomes, spec has {m} families",
            report.outcomes.len()
        )));
    }

    let close = |a: f64, b: f64| (a - b).abs() <= REPLAY_TOLERANCE;
    let mut state = engine.initial_state();
    let mut mismatches = Vec::new();
    let mut expected_decisions = BTreeMap::new();

    for outcome in &report.outcomes {
        let f = engine.family_index(&outcome.family).map_err(|_| {
            EngineError::ReportMismatch(format!("unknown family {}", outcome.family))
        })?;
        let fam = &engine.families[f];
        if state.tested[f] {
            return Err(EngineError::ReportMismatch(format!("family {} appears twice", fam.id)));
        }
        if state.next_layer() != Some(fam.layer) {
            return Err(EngineError::ReportMismatch(format!(
                "family {} tested before earlier layers were finished",
                fam.id
            )));
        }

        let labels = &engine.labels[fam.start..fam.start + fam.len];
        let mut accepted = vec![None; fam.len];
        for (set, is_accepted) in [(&outcome.rejected, false), (&outcome.accepted, true)] {
            for label in set {
                let k = labels.iter().position(|l| l == label).ok_or_else(|| {
                    EngineError::ReportMismatch(format!("{label} is not in family {}", fam.id))
                })?;
                if accepted[k].replace(is_accepted).is_some() {
                    return Err(EngineError::ReportMismatch(format!(
                        "{label} is listed twice in family {}",
                        fam.id
                    )));
                }
            }
        }
        let accepted: Vec<bool> = accepted
            .into_iter()
            .zip(labels)
            .map(|(a, label)| {
                a.ok_or_else(|| {
                    EngineError::ReportMismatch(format!("{label} is missing from family {}", fam.id))
                })
            })
            .collect::<Result<_, _>>()?;
        for (label, &a) in labels.iter().zip(&accepted) {
            let d = if a { Decision::NotSignificant } else { Decision::Significant };
            expected_decisions.insert(label.clone(), d);
        }

        let level = state.current_alpha[f];
        if !close(outcome.level, level) {
            mismatches.push(ReplayMismatch::Level {
                family: fam.id.clone(),
                reported: outcome.level,
                expected: level,
            });
        }
        let e_star = fam.procedure.bound_for_mask(&accepted, level);
        if !close(outcome.e_star, e_star) {
            mismatches.push(ReplayMismatch::EStar {
                family: fam.id.clone(),
                reported: outcome.e_star,
                expected: e_star,
            });
        }

        let remainder = level - e_star;
        let mut expected_targets = Vec::new();
        let mut amounts = Vec::new();
        for t in 0..m {
            let g = state.current_g[f * m + t];
            if g > 0.0 {
                expected_targets.push(engine.family_ids[t].clone());
                amounts.push(remainder * g);
                state.current_alpha[t] += remainder * g;
            }
            state.current_g[f * m + t] = 0.0;
        }
        state.tested[f] = true;
        let reported_targets: Vec<String> = outcome.transfers.iter().map(|t| t.to.clone()).collect();
        if reported_targets != expected_targets {
            mismatches.push(ReplayMismatch::TransferTargets {
                family: fam.id.clone(),
                reported: reported_targets,
                expected: expected_targets,
            });
        } else {
            for (transfer, expected) in outcome.transfers.iter().zip(amounts) {
                if !close(transfer.amount, expected) {
                    mismatches.push(ReplayMismatch::TransferAmount {
                        family: fam.id.clone(),
                        to: transfer.to.clone(),
                        reported: transfer.amount,
                        expected,
                    });
                }
            }
        }
    }

    if report.decisions.len() != expected_decisions.len()
        || report.decisions.keys().any(|k| !expected_decisions.contains_key(k))
    {
        return Err(EngineError::ReportMismatch(
            "decision map does not list exactly the spec's hypotheses".into(),
        ));
    }
    for (label, expected) in expected_decisions {
        let reported = report.decisions[&label];
        if reported != expected {
            mismatches.push(ReplayMismatch::Decision { label, reported, expected });
        }
    }
    Ok(ReplayOutcome { mismatches })
}
