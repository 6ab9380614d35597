//! Family-based graph: layers of families, initial critical values and
//! transition coefficients between families.
//!
//! Layers and families are addressed 1-based as `(i, j)`: family `j` of
//! layer `i`. A transition `g` from `(i, j)` to `(k, l)` is the fraction of
//! the unspent level of `(i, j)` handed to `(k, l)` once `(i, j)` has been
//! tested. Only forward transitions (`i < k`) may be nonzero.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::procedures::{LocalProcedure, LocalProcedureSpec, ProcedureIssue};

/// Slack accepted on the `≤ 1` row-sum and `≤ α` budget constraints, so that
/// decimal literals such as `0.8 + 0.2` validate.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

/// Position of a family: layer `i` and family `j` within the layer, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FamilyPos {
    pub layer: usize,
    pub family: usize,
}

impl fmt::Display for FamilyPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.family)
    }
}

/// A hypothesis located in the graph (indices 1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisRef {
    pub layer: usize,
    pub family: usize,
    pub index: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub id: String,
    pub hypotheses: Vec<String>,
    /// Initial critical value.
    pub alpha: f64,
    pub procedure: LocalProcedureSpec,
}

impl FamilySpec {
    pub fn new<S: Into<String>>(
        id: impl Into<String>,
        hypotheses: impl IntoIterator<Item = S>,
        alpha: f64,
        procedure: LocalProcedureSpec,
    ) -> Self {
        FamilySpec {
            id: id.into(),
            hypotheses: hypotheses.into_iter().map(Into::into).collect(),
            alpha,
            procedure,
        }
    }

    pub fn resolve_procedure(&self) -> Result<LocalProcedure, Vec<ProcedureIssue>> {
        self.procedure.resolve(&self.hypotheses)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub g: f64,
}

/// Transition coefficients keyed by family id. Absent pairs are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransitionCoefficients {
    entries: Vec<Transition>,
}

impl TransitionCoefficients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, from: &str, to: &str, g: f64) -> Self {
        self.insert(from, to, g);
        self
    }

    /// Sets the coefficient, replacing an existing entry for the same pair.
    pub fn insert(&mut self, from: &str, to: &str, g: f64) {
        match self.entries.iter_mut().find(|t| t.from == from && t.to == to) {
            Some(t) => t.g = g,
            None => self.entries.push(Transition { from: from.into(), to: to.into(), g }),
        }
    }

    pub fn get(&self, from: &str, to: &str) -> f64 {
        self.entries
            .iter()
            .filter(|t| t.from == from && t.to == to)
            .map(|t| t.g)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    pub fn row_sum(&self, from: &str) -> f64 {
        self.entries.iter().filter(|t| t.from == from).map(|t| t.g).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<Transition> for TransitionCoefficients {
    fn from_iter<I: IntoIterator<Item = Transition>>(iter: I) -> Self {
        TransitionCoefficients { entries: iter.into_iter().collect() }
    }
}

/// The full family-based strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    /// Overall level α.
    pub alpha: f64,
    pub layers: Vec<Vec<FamilySpec>>,
    #[serde(default)]
    pub transitions: TransitionCoefficients,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed spec JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("spec is not valid:\n{0}")]
    Invalid(ValidationOutcome),
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    /// Families in declared order with their positions.
    pub fn families(&self) -> impl Iterator<Item = (FamilyPos, &FamilySpec)> {
        self.layers.iter().enumerate().flat_map(|(i, layer)| {
            layer
                .iter()
                .enumerate()
                .map(move |(j, fam)| (FamilyPos { layer: i + 1, family: j + 1 }, fam))
        })
    }

    pub fn family(&self, id: &str) -> Option<(FamilyPos, &FamilySpec)> {
        self.families().find(|(_, f)| f.id == id)
    }

    pub fn family_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn hypotheses(&self) -> Vec<HypothesisRef> {
        self.families()
            .flat_map(|(pos, fam)| {
                fam.hypotheses.iter().enumerate().map(move |(k, label)| HypothesisRef {
                    layer: pos.layer,
                    family: pos.family,
                    index: k + 1,
                    label: label.clone(),
                })
            })
            .collect()
    }

    /// Hypothesis labels in declared order.
    pub fn labels(&self) -> Vec<String> {
        self.families().flat_map(|(_, f)| f.hypotheses.iter().cloned()).collect()
    }

    pub fn validate(&self) -> ValidationOutcome {
        validate_spec(self)
    }

    /// Renders the graph in Graphviz DOT. The spec must validate.
    pub fn to_dot(&self) -> Result<String, SpecError> {
        to_dot(self)
    }
}

/// A broken structural constraint of a [`GraphSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    GlobalAlphaOutOfRange { alpha: f64 },
    NoLayers,
    EmptyLayer { layer: usize },
    EmptyFamily { family: String },
    FamilyAlphaOutOfRange { family: String, alpha: f64 },
    DuplicateFamilyId { family: String },
    DuplicateLabel { label: String },
    AlphaBudgetExceeded { total: f64, alpha: f64 },
    UnknownFamily { family: String },
    DuplicateTransition { from: String, to: String },
    CoefficientOutOfRange { from: String, to: String, g: f64 },
    BackwardEdge { from: String, to: String, g: f64 },
    RowSumExceeded { from: String, sum: f64 },
    Procedure { family: String, issue: ProcedureIssue },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GlobalAlphaOutOfRange { alpha } => {
                write!(f, "overall alpha {alpha} is outside [0, 1]")
            }
            Violation::NoLayers => write!(f, "spec has no layers"),
            Violation::EmptyLayer { layer } => write!(f, "layer {layer} has no families"),
            Violation::EmptyFamily { family } => write!(f, "family {family} has no hypotheses"),
            Violation::FamilyAlphaOutOfRange { family, alpha } => {
                write!(f, "initial alpha {alpha} of family {family} is outside [0, 1]")
            }
            Violation::DuplicateFamilyId { family } => write!(f, "family id {family} is used twice"),
            Violation::DuplicateLabel { label } => write!(f, "hypothesis label {label} is used twice"),
            Violation::AlphaBudgetExceeded { total, alpha } => write!(
                f,
                "initial alphas sum to {} > overall alpha {}",
                fmt_num(*total),
                fmt_num(*alpha)
            ),
            Violation::UnknownFamily { family } => {
                write!(f, "transition refers to unknown family {family}")
            }
            Violation::DuplicateTransition { from, to } => {
                write!(f, "transition {from} -> {to} is listed twice")
            }
            Violation::CoefficientOutOfRange { from, to, g } => {
                write!(f, "coefficient {from} -> {to} = {g} is outside [0, 1]")
            }
            Violation::BackwardEdge { from, to, g } => write!(
                f,
                "backward edge {from} -> {to} (g = {}): g must be 0 if i >= k",
                fmt_num(*g)
            ),
            Violation::RowSumExceeded { from, sum } => {
                write!(f, "row sum {} > 1 for transitions out of {from}", fmt_num(*sum))
            }
            Violation::Procedure { family, issue } => write!(f, "family {family}: {issue}"),
        }
    }
}

/// Result of [`validate_spec`]: empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationOutcome {
    pub violations: Vec<Violation>,
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural constraint and reports all violations.
pub fn validate_spec(spec: &GraphSpec) -> ValidationOutcome {
    let mut out = Vec::new();

    if !(0.0..=1.0).contains(&spec.alpha) {
        out.push(Violation::GlobalAlphaOutOfRange { alpha: spec.alpha });
    }
    if spec.layers.is_empty() {
        out.push(Violation::NoLayers);
    }

    let mut positions: HashMap<&str, FamilyPos> = HashMap::new();
    let mut labels = HashSet::new();
    let mut total = 0.0;
    for (i, layer) in spec.layers.iter().enumerate() {
        if layer.is_empty() {
            out.push(Violation::EmptyLayer { layer: i + 1 });
        }
    }
    for (pos, fam) in spec.families() {
        if positions.insert(&fam.id, pos).is_some() {
            out.push(Violation::DuplicateFamilyId { family: fam.id.clone() });
        }
        if fam.hypotheses.is_empty() {
            out.push(Violation::EmptyFamily { family: fam.id.clone() });
        }
        if !(0.0..=1.0).contains(&fam.alpha) {
            out.push(Violation::FamilyAlphaOutOfRange { family: fam.id.clone(), alpha: fam.alpha });
        }
        total += fam.alpha;
        for label in &fam.hypotheses {
            if !labels.insert(label.as_str()) {
                out.push(Violation::DuplicateLabel { label: label.clone() });
            }
        }
        if let Err(issues) = fam.resolve_procedure() {
            out.extend(
                issues
                    .into_iter()
                    .map(|issue| Violation::Procedure { family: fam.id.clone(), issue }),
            );
        }
    }
    if total > spec.alpha + CONSTRAINT_SLACK {
        out.push(Violation::AlphaBudgetExceeded { total, alpha: spec.alpha });
    }

    let mut seen_pairs = HashSet::new();
    let mut unknown = HashSet::new();
    for t in spec.transitions.iter() {
        let from = positions.get(t.from.as_str());
        let to = positions.get(t.to.as_str());
        for (id, found) in [(&t.from, from), (&t.to, to)] {
            if found.is_none() && unknown.insert(id.clone()) {
                out.push(Violation::UnknownFamily { family: id.clone() });
            }
        }
        if !seen_pairs.insert((t.from.as_str(), t.to.as_str())) {
            out.push(Violation::DuplicateTransition { from: t.from.clone(), to: t.to.clone() });
        }
        if !(0.0..=1.0).contains(&t.g) {
            out.push(Violation::CoefficientOutOfRange {
                from: t.from.clone(),
                to: t.to.clone(),
                g: t.g,
            });
        }
        if let (Some(from), Some(to)) = (from, to) {
            if from.layer >= to.layer && t.g != 0.0 {
                out.push(Violation::BackwardEdge { from: t.from.clone(), to: t.to.clone(), g: t.g });
            }
        }
    }

    let mut row_sums: Vec<(&str, f64)> = Vec::new();
    for t in spec.transitions.iter() {
        match row_sums.iter_mut().find(|(from, _)| *from == t.from) {
            Some((_, sum)) => *sum += t.g,
            None => row_sums.push((&t.from, t.g)),
        }
    }
    for (from, sum) in row_sums {
        if sum > 1.0 + CONSTRAINT_SLACK {
            out.push(Violation::RowSumExceeded { from: from.to_string(), sum });
        }
    }

    ValidationOutcome { violations: out }
}

/// Deterministic DOT rendering: one node per family labelled with its id and
/// initial alpha, families of a layer on the same rank, one edge per nonzero
/// coefficient in family order.
pub fn to_dot(spec: &GraphSpec) -> Result<String, SpecError> {
    let outcome = validate_spec(spec);
    if !outcome.is_ok() {
        return Err(SpecError::Invalid(outcome));
    }
    let mut dot = String::new();
    dot.push_str("digraph gatekeeping {\n");
    dot.push_str("  rankdir=TB;\n");
    dot.push_str("  node [shape=box];\n");
    for (i, layer) in spec.layers.iter().enumerate() {
        writeln!(dot, "  subgraph layer_{} {{", i + 1).unwrap();
        dot.push_str("    rank=same;\n");
        for fam in layer {
            writeln!(
                dot,
                "    {} [label={}];",
                dot_id(&fam.id),
                dot_id(&format!("{} ({})", fam.id, fmt_num(fam.alpha)))
            )
            .unwrap();
        }
        dot.push_str("  }\n");
    }
    let order: BTreeMap<FamilyPos, &str> =
        spec.families().map(|(pos, f)| (pos, f.id.as_str())).collect();
    for from in order.values() {
        for to in order.values() {
            let g = spec.transitions.get(from, to);
            if g > 0.0 {
                writeln!(dot, "  {} -> {} [label={}];", dot_id(from), dot_id(to), dot_id(&fmt_num(g)))
                    .unwrap();
            }
        }
    }
    dot.push_str("}\n");
    Ok(dot)
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Formats a probability for display: at most 12 decimals, trailing zeros
/// trimmed, so `0.7 + 0.4` prints as `1.1`.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
