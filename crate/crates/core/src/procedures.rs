//! Local FWER-controlling procedures and upper bounds of their error rate
//! functions.
//!
//! Every procedure here tests a single family of `n` hypotheses at a local
//! level. Thresholds are linear in the level and comparisons use `<=`, so a
//! p-value equal to its threshold is rejected.
//!
//! The error rate bound `e*(A)` is evaluated at the set `A` of accepted
//! hypotheses. The part of the level not covered by `e*(A)` is what a family
//! may pass on to later families.
//!
//! | kind                  | thresholds for ordered `p(i)`              | `e*(A)`, `A != ∅`            |
//! |-----------------------|--------------------------------------------|------------------------------|
//! | Bonferroni            | `w_k · level`                              | `level · Σ_{k∈A} w_k`        |
//! | Holm                  | step-down, `level / (n - i + 1)`           | `level`                      |
//! | TruncatedHolm(γ)      | step-down, `(γ/(n-i+1) + (1-γ)/n) · level` | `(γ + (1-γ)·|A|/n) · level`  |
//! | Hochberg              | step-up, `level / (n - i + 1)`             | `level`                      |
//! | TruncatedHochberg(γ)  | step-up, `(γ/(n-i+1) + (1-γ)/n) · level`   | `(γ + (1-γ)·|A|/n) · level`  |
//! | FixedSequence         | `level` along the prescribed order         | `level`                      |

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when checking that weights sum to one.
pub const WEIGHT_SUM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    Bonferroni,
    Holm,
    TruncatedHolm,
    Hochberg,
    TruncatedHochberg,
    FixedSequence,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 6] = [
        ProcedureKind::Bonferroni,
        ProcedureKind::Holm,
        ProcedureKind::TruncatedHolm,
        ProcedureKind::Hochberg,
        ProcedureKind::TruncatedHochberg,
        ProcedureKind::FixedSequence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProcedureKind::Bonferroni => "bonferroni",
            ProcedureKind::Holm => "holm",
            ProcedureKind::TruncatedHolm => "truncated_holm",
            ProcedureKind::Hochberg => "hochberg",
            ProcedureKind::TruncatedHochberg => "truncated_hochberg",
            ProcedureKind::FixedSequence => "fixed_sequence",
        }
    }

    fn is_truncated(self) -> bool {
        matches!(self, ProcedureKind::TruncatedHolm | ProcedureKind::TruncatedHochberg)
    }

    fn accepts_weights(self) -> bool {
        matches!(self, ProcedureKind::Bonferroni | ProcedureKind::Holm)
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Declarative form of a local procedure, as written in a spec file.
///
/// Hypotheses in `order` are referred to by label; [`LocalProcedureSpec::resolve`]
/// turns the description into an executable [`LocalProcedure`] for a concrete
/// family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalProcedureSpec {
    pub kind: ProcedureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

impl LocalProcedureSpec {
    fn plain(kind: ProcedureKind) -> Self {
        LocalProcedureSpec { kind, gamma: None, weights: None, order: None }
    }

    pub fn bonferroni() -> Self {
        Self::plain(ProcedureKind::Bonferroni)
    }

    pub fn holm() -> Self {
        Self::plain(ProcedureKind::Holm)
    }

    pub fn hochberg() -> Self {
        Self::plain(ProcedureKind::Hochberg)
    }

    pub fn truncated_holm(gamma: f64) -> Self {
        LocalProcedureSpec { gamma: Some(gamma), ..Self::plain(ProcedureKind::TruncatedHolm) }
    }

    pub fn truncated_hochberg(gamma: f64) -> Self {
        LocalProcedureSpec { gamma: Some(gamma), ..Self::plain(ProcedureKind::TruncatedHochberg) }
    }

    pub fn fixed_sequence<S: Into<String>>(order: impl IntoIterator<Item = S>) -> Self {
        LocalProcedureSpec {
            order: Some(order.into_iter().map(Into::into).collect()),
            ..Self::plain(ProcedureKind::FixedSequence)
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    /// Checks the description against the family's hypothesis labels and
    /// builds the executable procedure. All issues are reported.
    pub fn resolve(&self, hypotheses: &[String]) -> Result<LocalProcedure, Vec<ProcedureIssue>> {
        let mut issues = Vec::new();
        let n = hypotheses.len();

        let gamma = match (self.kind.is_truncated(), self.gamma) {
            (true, None) => {
                issues.push(ProcedureIssue::MissingGamma);
                0.0
            }
            (true, Some(g)) => {
                if !(0.0..1.0).contains(&g) {
                    issues.push(ProcedureIssue::GammaOutOfRange { gamma: g });
                }
                g
            }
            (false, Some(_)) => {
                issues.push(ProcedureIssue::UnexpectedGamma);
                0.0
            }
            (false, None) => 0.0,
        };

        if let Some(weights) = &self.weights {
            if !self.kind.accepts_weights() {
                issues.push(ProcedureIssue::WeightsNotSupported { kind: self.kind });
            } else {
                issues.extend(check_weights(weights, n));
            }
        }

        let order = match (self.kind == ProcedureKind::FixedSequence, &self.order) {
            (true, None) => {
                issues.push(ProcedureIssue::MissingOrder);
                Vec::new()
            }
            (true, Some(order)) => match order_indices(order, hypotheses) {
                Some(idx) => idx,
                None => {
                    issues.push(ProcedureIssue::OrderNotPermutation { order: order.clone() });
                    Vec::new()
                }
            },
            (false, Some(_)) => {
                issues.push(ProcedureIssue::UnexpectedOrder);
                Vec::new()
            }
            (false, None) => Vec::new(),
        };

        if !issues.is_empty() {
            return Err(issues);
        }

        let weights = self.weights.clone();
        Ok(match self.kind {
            ProcedureKind::Bonferroni => LocalProcedure::Bonferroni { weights },
            ProcedureKind::Holm => LocalProcedure::Holm { weights },
            ProcedureKind::TruncatedHolm => LocalProcedure::TruncatedHolm { gamma },
            ProcedureKind::Hochberg => LocalProcedure::Hochberg,
            ProcedureKind::TruncatedHochberg => LocalProcedure::TruncatedHochberg { gamma },
            ProcedureKind::FixedSequence => LocalProcedure::FixedSequence { order },
        })
    }
}

fn check_weights(weights: &[f64], n: usize) -> Vec<ProcedureIssue> {
    let mut issues = Vec::new();
    if weights.len() != n {
        issues.push(ProcedureIssue::WeightCount { expected: n, found: weights.len() });
    }
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight >= 0.0 && weight.is_finite()) {
            issues.push(ProcedureIssue::NegativeWeight { index, weight });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_SLACK {
        issues.push(ProcedureIssue::WeightSum { sum });
    }
    issues
}

fn order_indices(order: &[String], hypotheses: &[String]) -> Option<Vec<usize>> {
    if order.len() != hypotheses.len() {
        return None;
    }
    let mut seen = vec![false; hypotheses.len()];
    let mut idx = Vec::with_capacity(order.len());
    for label in order {
        let k = hypotheses.iter().position(|h| h == label)?;
        if std::mem::replace(&mut seen[k], true) {
            return None;
        }
        idx.push(k);
    }
    Some(idx)
}

/// A problem with a [`LocalProcedureSpec`] for a given family.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcedureIssue {
    MissingGamma,
    UnexpectedGamma,
    GammaOutOfRange { gamma: f64 },
    WeightsNotSupported { kind: ProcedureKind },
    WeightCount { expected: usize, found: usize },
    NegativeWeight { index: usize, weight: f64 },
    WeightSum { sum: f64 },
    MissingOrder,
    UnexpectedOrder,
    OrderNotPermutation { order: Vec<String> },
}

impl fmt::Display for ProcedureIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcedureIssue::MissingGamma => write!(f, "truncated procedure requires gamma"),
            ProcedureIssue::UnexpectedGamma => {
                write!(f, "gamma only applies to truncated procedures")
            }
            ProcedureIssue::GammaOutOfRange { gamma } => {
                write!(f, "gamma {gamma} must lie in [0, 1)")
            }
            ProcedureIssue::WeightsNotSupported { kind } => {
                write!(f, "weights are not supported for {kind}")
            }
            ProcedureIssue::WeightCount { expected, found } => {
                write!(f, "expected {expected} weights, found {found}")
            }
            ProcedureIssue::NegativeWeight { index, weight } => {
                write!(f, "weight {weight} at position {index} must be a nonnegative number")
            }
            ProcedureIssue::WeightSum { sum } => {
                write!(f, "weights sum to {} instead of 1", crate::graph::fmt_num(*sum))
            }
            ProcedureIssue::MissingOrder => write!(f, "fixed_sequence requires an order"),
            ProcedureIssue::UnexpectedOrder => {
                write!(f, "order only applies to fixed_sequence")
            }
            ProcedureIssue::OrderNotPermutation { order } => {
                write!(f, "order [{}] is not a permutation of the family", order.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcedureError {
    #[error("procedure expects {expected} p-values, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("p-value {value} at position {index} is outside [0, 1]")]
    PValueOutOfRange { index: usize, value: f64 },
    #[error("level {0} is outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("hypothesis index {index} is out of range for a family of {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("a family needs at least one hypothesis")]
    EmptyFamily,
}

/// P-values of one family, in family order, and the local level to test at.
#[derive(Debug, Clone, Copy)]
pub struct FamilyTestInput<'a> {
    pub pvalues: &'a [f64],
    pub level: f64,
}

/// An executable local procedure. Hypotheses are addressed by their 0-based
/// position within the family.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalProcedure {
    /// Weighted Bonferroni; `None` means equal weights.
    Bonferroni { weights: Option<Vec<f64>> },
    /// Weighted Holm step-down; `None` means equal weights.
    Holm { weights: Option<Vec<f64>> },
    TruncatedHolm { gamma: f64 },
    Hochberg,
    TruncatedHochberg { gamma: f64 },
    /// Positions in the order they are tested.
    FixedSequence { order: Vec<usize> },
}

impl LocalProcedure {
    pub fn kind(&self) -> ProcedureKind {
        match self {
            LocalProcedure::Bonferroni { .. } => ProcedureKind::Bonferroni,
            LocalProcedure::Holm { .. } => ProcedureKind::Holm,
            LocalProcedure::TruncatedHolm { .. } => ProcedureKind::TruncatedHolm,
            LocalProcedure::Hochberg => ProcedureKind::Hochberg,
            LocalProcedure::TruncatedHochberg { .. } => ProcedureKind::TruncatedHochberg,
            LocalProcedure::FixedSequence { .. } => ProcedureKind::FixedSequence,
        }
    }

    /// Number of hypotheses the procedure is bound to, if it is bound to one.
    pub fn arity(&self) -> Option<usize> {
        match self {
            LocalProcedure::Bonferroni { weights: Some(w) }
            | LocalProcedure::Holm { weights: Some(w) } => Some(w.len()),
            LocalProcedure::FixedSequence { order } => Some(order.len()),
            _ => None,
        }
    }

    fn check_arity(&self, n: usize) -> Result<(), ProcedureError> {
        if n == 0 {
            return Err(ProcedureError::EmptyFamily);
        }
        match self.arity() {
            Some(expected) if expected != n => Err(ProcedureError::Arity { expected, found: n }),
            _ => Ok(()),
        }
    }

    /// Returns the positions rejected at `input.level`.
    pub fn test_family(&self, input: FamilyTestInput<'_>) -> Result<BTreeSet<usize>, ProcedureError> {
        let n = input.pvalues.len();
        self.check_arity(n)?;
        check_level(input.level)?;
        for (index, &value) in input.pvalues.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProcedureError::PValueOutOfRange { index, value });
            }
        }
        let mut rejected = vec![false; n];
        self.reject_into(input.pvalues, input.level, &mut rejected);
        Ok(rejected
            .iter()
            .enumerate()
            .filter_map(|(k, &r)| r.then_some(k))
            .collect())
    }

    /// Upper bound `e*(A)` of the error rate function at the accepted set `A`.
    pub fn error_rate_bound(&self, accepted: &[usize], n: usize, level: f64) -> Result<f64, ProcedureError> {
        self.check_arity(n)?;
        check_level(level)?;
        let mut mask = vec![false; n];
        for &index in accepted {
            if index >= n {
                return Err(ProcedureError::IndexOutOfRange { index, n });
            }
            mask[index] = true;
        }
        Ok(self.bound_for_mask(&mask, level))
    }

    /// Writes the rejection decisions into `rejected`. Inputs are trusted.
    pub(crate) fn reject_into(&self, p: &[f64], level: f64, rejected: &mut [bool]) {
        let n = p.len();
        debug_assert_eq!(rejected.len(), n);
        rejected.iter_mut().for_each(|r| *r = false);
        if level <= 0.0 {
            return;
        }
        match self {
            LocalProcedure::Bonferroni { weights } => {
                for k in 0..n {
                    let share = match weights {
                        Some(w) => w[k] * level,
                        None => level / n as f64,
                    };
                    rejected[k] = p[k] <= share;
                }
            }
            LocalProcedure::Holm { weights: None } => {
                step_down(p, rejected, |i| level / (n - i + 1) as f64);
            }
            LocalProcedure::Holm { weights: Some(w) } => weighted_holm(p, w, level, rejected),
            LocalProcedure::TruncatedHolm { gamma } => {
                step_down(p, rejected, |i| truncated_threshold(*gamma, i, n, level));
            }
            LocalProcedure::Hochberg => {
                step_up(p, rejected, |i| level / (n - i + 1) as f64);
            }
            LocalProcedure::TruncatedHochberg { gamma } => {
                step_up(p, rejected, |i| truncated_threshold(*gamma, i, n, level));
            }
            LocalProcedure::FixedSequence { order } => {
                for &k in order {
                    if p[k] > level {
                        break;
                    }
                    rejected[k] = true;
                }
            }
        }
    }

    /// `e*` evaluated at the accepted mask.
    pub(crate) fn bound_for_mask(&self, accepted: &[bool], level: f64) -> f64 {
        let n = accepted.len();
        let count = accepted.iter().filter(|&&a| a).count();
        if count == 0 {
            return 0.0;
        }
        let bound = match self {
            LocalProcedure::Bonferroni { weights: None } => level * count as f64 / n as f64,
            LocalProcedure::Bonferroni { weights: Some(w) } => {
                let share: f64 = accepted
                    .iter()
                    .zip(w)
                    .filter(|(&a, _)| a)
                    .map(|(_, &w)| w)
                    .sum();
                level * share
            }
            LocalProcedure::Holm { .. }
            | LocalProcedure::Hochberg
            | LocalProcedure::FixedSequence { .. } => level,
            LocalProcedure::TruncatedHolm { gamma } | LocalProcedure::TruncatedHochberg { gamma } => {
                (gamma + (1.0 - gamma) * count as f64 / n as f64) * level
            }
        };
        bound.clamp(0.0, level)
    }
}

fn check_level(level: f64) -> Result<(), ProcedureError> {
    if (0.0..=1.0).contains(&level) {
        Ok(())
    } else {
        Err(ProcedureError::LevelOutOfRange(level))
    }
}

/// Threshold of the truncated procedures for the `i`-th smallest p-value (1-based).
fn truncated_threshold(gamma: f64, i: usize, n: usize, level: f64) -> f64 {
    (gamma / (n - i + 1) as f64 + (1.0 - gamma) / n as f64) * level
}

/// Positions sorted by p-value; ties keep ascending position.
fn ascending(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    idx
}

fn step_down(p: &[f64], rejected: &mut [bool], threshold: impl Fn(usize) -> f64) {
    for (rank, k) in ascending(p).into_iter().enumerate() {
        if p[k] > threshold(rank + 1) {
            break;
        }
        rejected[k] = true;
    }
}

fn step_up(p: &[f64], rejected: &mut [bool], threshold: impl Fn(usize) -> f64) {
    let idx = ascending(p);
    if let Some(last) = (1..=idx.len()).rev().find(|&i| p[idx[i - 1]] <= threshold(i)) {
        for &k in &idx[..last] {
            rejected[k] = true;
        }
    }
}

/// Weighted Holm: a remaining hypothesis is rejected when its p-value is at
/// most its weight renormalised over the remaining set, times the level.
/// Rejections only raise the thresholds of the others, so rejecting every
/// eligible hypothesis per pass gives the same set as one at a time.
fn weighted_holm(p: &[f64], weights: &[f64], level: f64, rejected: &mut [bool]) {
    let n = p.len();
    loop {
        let remaining = rejected.iter().filter(|&&r| !r).count();
        if remaining == 0 {
            return;
        }
        let total: f64 = (0..n).filter(|&k| !rejected[k]).map(|k| weights[k]).sum();
        let eligible: Vec<usize> = (0..n)
            .filter(|&k| !rejected[k])
            .filter(|&k| {
                let threshold = if total > 0.0 {
                    level * weights[k] / total
                } else {
                    level / remaining as f64
                };
                p[k] <= threshold
            })
            .collect();
        if eligible.is_empty() {
            return;
        }
        for k in eligible {
            rejected[k] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    fn labels(n: usize) -> Vec<String> {
        (1..=n).map(|k| format!("H{k}")).collect()
    }

    #[test]
    fn fixed_sequence_stops_at_first_failure() {
        let proc = LocalProcedureSpec::fixed_sequence(["H21", "H22", "H23"])
            .resolve(&["H21".into(), "H22".into(), "H23".into()])
            .unwrap();
        let got = proc
            .test_family(FamilyTestInput { pvalues: &[0.009, 0.026, 0.013], level: 0.025 })
            .unwrap();
        assert_eq!(got, set(&[0]));
    }

    #[test]
    fn fixed_sequence_follows_prescribed_order() {
        let proc = LocalProcedure::FixedSequence { order: vec![2, 0, 1] };
        let got = proc
            .test_family(FamilyTestInput { pvalues: &[0.01, 0.5, 0.02], level: 0.05 })
            .unwrap();
        assert_eq!(got, set(&[0, 2]));
    }

    #[test]
    fn truncated_hochberg_rejects_all_primary_doses() {
        let proc = LocalProcedure::TruncatedHochberg { gamma: 0.5 };
        let got = proc
            .test_family(FamilyTestInput { pvalues: &[0.005, 0.011, 0.018], level: 0.04 })
            .unwrap();
        assert_eq!(got, set(&[0, 1, 2]));
    }

    #[test]
    fn hochberg_step_up_example() {
        let got = LocalProcedure::Hochberg
            .test_family(FamilyTestInput { pvalues: &[0.010, 0.006, 0.051], level: 0.025333 })
            .unwrap();
        assert_eq!(got, set(&[0, 1]));
    }

    #[test]
    fn hochberg_rejects_everything_when_largest_passes() {
        // Holm would stop at 0.03 > 0.025; step-up does not.
        let p = [0.03, 0.04, 0.045];
        let hoch = LocalProcedure::Hochberg
            .test_family(FamilyTestInput { pvalues: &p, level: 0.05 })
            .unwrap();
        let holm = LocalProcedure::Holm { weights: None }
            .test_family(FamilyTestInput { pvalues: &p, level: 0.05 })
            .unwrap();
        assert_eq!(hoch, set(&[0, 1, 2]));
        assert!(holm.is_empty());
    }

    #[test]
    fn zero_level_rejects_nothing() {
        let p = [0.0, 0.0, 0.0];
        let procs = [
            LocalProcedure::Bonferroni { weights: None },
            LocalProcedure::Holm { weights: None },
            LocalProcedure::TruncatedHolm { gamma: 0.3 },
            LocalProcedure::Hochberg,
            LocalProcedure::TruncatedHochberg { gamma: 0.3 },
            LocalProcedure::FixedSequence { order: vec![0, 1, 2] },
        ];
        for proc in procs {
            let got = proc.test_family(FamilyTestInput { pvalues: &p, level: 0.0 }).unwrap();
            assert!(got.is_empty(), "{:?}", proc.kind());
        }
    }

    #[test]
    fn threshold_equality_rejects() {
        let got = LocalProcedure::Bonferroni { weights: None }
            .test_family(FamilyTestInput { pvalues: &[0.025, 0.0250001], level: 0.05 })
            .unwrap();
        assert_eq!(got, set(&[0]));
    }

    #[test]
    fn ties_are_processed_in_position_order() {
        let got = LocalProcedure::TruncatedHolm { gamma: 0.0 }
            .test_family(FamilyTestInput { pvalues: &[0.0199, 0.0199, 0.9], level: 0.06 })
            .unwrap();
        assert_eq!(got, set(&[0, 1]));
    }

    #[test]
    fn weighted_holm_renormalises_after_rejection() {
        let proc = LocalProcedure::Holm { weights: Some(vec![0.8, 0.2]) };
        // 0.03 <= 0.8*0.05 rejects H1, then H2 is tested at the full level.
        let got = proc
            .test_family(FamilyTestInput { pvalues: &[0.03, 0.045], level: 0.05 })
            .unwrap();
        assert_eq!(got, set(&[0, 1]));
        let got = proc
            .test_family(FamilyTestInput { pvalues: &[0.055, 0.009], level: 0.05 })
            .unwrap();
        assert_eq!(got, set(&[1]));
    }

    #[test]
    fn equal_weight_holm_matches_explicit_equal_weights() {
        let p = [0.011, 0.02, 0.051, 0.013];
        let a = LocalProcedure::Holm { weights: None }
            .test_family(FamilyTestInput { pvalues: &p, level: 0.05 })
            .unwrap();
        let b = LocalProcedure::Holm { weights: Some(vec![0.25; 4]) }
            .test_family(FamilyTestInput { pvalues: &p, level: 0.05 })
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, set(&[0, 1, 3]));
    }

    #[test]
    fn errors_on_bad_input() {
        let proc = LocalProcedure::FixedSequence { order: vec![0, 1] };
        assert_eq!(
            proc.test_family(FamilyTestInput { pvalues: &[0.1], level: 0.05 }),
            Err(ProcedureError::Arity { expected: 2, found: 1 })
        );
        assert_eq!(
            LocalProcedure::Hochberg.test_family(FamilyTestInput { pvalues: &[0.1, 1.2], level: 0.05 }),
            Err(ProcedureError::PValueOutOfRange { index: 1, value: 1.2 })
        );
        assert_eq!(
            LocalProcedure::Hochberg.error_rate_bound(&[3], 3, 0.05),
            Err(ProcedureError::IndexOutOfRange { index: 3, n: 3 })
        );
    }

    #[test]
    fn bounds_match_closed_forms() {
        let holm = LocalProcedure::Holm { weights: None };
        assert_eq!(holm.error_rate_bound(&[1], 3, 0.05).unwrap(), 0.05);
        assert_eq!(holm.error_rate_bound(&[], 3, 0.05).unwrap(), 0.0);

        let bonf = LocalProcedure::Bonferroni { weights: None };
        assert_eq!(bonf.error_rate_bound(&[0], 1, 0.025).unwrap(), 0.025);
        assert!((bonf.error_rate_bound(&[0, 2], 4, 0.04).unwrap() - 0.02).abs() < 1e-15);

        let trunc = LocalProcedure::TruncatedHochberg { gamma: 0.5 };
        let e = trunc.error_rate_bound(&[1], 3, 0.037).unwrap();
        assert!((e - 0.024_666_666_666_666_667).abs() < 1e-15);
        assert_eq!(trunc.error_rate_bound(&[0, 1, 2], 3, 0.037).unwrap(), 0.037);
    }

    #[test]
    fn resolve_reports_every_issue() {
        let spec = LocalProcedureSpec {
            kind: ProcedureKind::TruncatedHochberg,
            gamma: None,
            weights: Some(vec![0.5, 0.5]),
            order: Some(vec!["H1".into()]),
        };
        let issues = spec.resolve(&labels(2)).unwrap_err();
        assert_eq!(
            issues,
            vec![
                ProcedureIssue::MissingGamma,
                ProcedureIssue::WeightsNotSupported { kind: ProcedureKind::TruncatedHochberg },
                ProcedureIssue::UnexpectedOrder,
            ]
        );

        let issues = LocalProcedureSpec::holm().with_weights(vec![0.7, 0.4]).resolve(&labels(2)).unwrap_err();
        assert!(matches!(issues[..], [ProcedureIssue::WeightSum { .. }]));

        let issues = LocalProcedureSpec::truncated_holm(1.0).resolve(&labels(2)).unwrap_err();
        assert_eq!(issues, vec![ProcedureIssue::GammaOutOfRange { gamma: 1.0 }]);

        let issues = LocalProcedureSpec::fixed_sequence(["H1", "H1"]).resolve(&labels(2)).unwrap_err();
        assert!(matches!(issues[..], [ProcedureIssue::OrderNotPermutation { .. }]));
    }

    #[test]
    fn spec_json_shape() {
        let spec: LocalProcedureSpec =
            serde_json::from_str(r#"{"kind":"truncated_hochberg","gamma":0.5}"#).unwrap();
        assert_eq!(spec, LocalProcedureSpec::truncated_hochberg(0.5));
        assert!(serde_json::from_str::<LocalProcedureSpec>(r#"{"kind":"holm","alpha":1}"#).is_err());
        assert_eq!(
            serde_json::to_string(&LocalProcedureSpec::holm()).unwrap(),
            r#"{"kind":"holm"}"#
        );
    }
}
