//! Family-based graphical gatekeeping.
//!
//! Hypotheses are grouped into families and families into ordered layers.
//! Each family is tested by its own FWER-controlling local procedure; once a
//! family is tested, the part of its critical value not used up by the error
//! rate bound of the accepted set flows to later families along weighted
//! edges. The overall FWER across all families stays at the chosen level.
//!
//! - [`graph`]: the strategy description, validation, JSON and DOT.
//! - [`procedures`]: local procedures and their error rate bounds.
//! - [`engine`]: sequential execution with an audit trail and replay.
//! - [`bretz`]: hypothesis-level sequentially rejective graphs, used as an
//!   independent cross-check.
//! - [`mcsim`]: Monte Carlo estimation of the overall FWER.
//! - [`cli`]: the `gatekeep` command line front end.

pub mod bretz;
pub mod catalog;
pub mod cli;
pub mod engine;
pub mod graph;
pub mod mcsim;
pub mod procedures;

pub use engine::{replay, run, Decision, Engine, EngineError, ExecutionState, FamilyOutcome, TestReport};
pub use graph::{to_dot, validate_spec, FamilySpec, GraphSpec, TransitionCoefficients, ValidationOutcome};
pub use procedures::{FamilyTestInput, LocalProcedure, LocalProcedureSpec, ProcedureKind};
