//! Monte Carlo estimation of the overall FWER of a [`GraphSpec`].
//!
//! Replicate `r` draws from its own ChaCha8 stream (`seed`, stream `r`), so a
//! result depends only on the configuration and never on how rayon splits
//! the work. Per-thread accumulators hold integer counts and are summed, which
//! keeps the output bit-identical across thread counts.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::engine::{Engine, EngineError};
use crate::graph::GraphSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    TrueNull,
    FalseNull,
}

fn default_delta() -> f64 {
    3.0
}

/// How p-values are generated. False nulls always get a one-sided normal
/// shift `delta`; true nulls are exactly uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PValueModel {
    IndependentUniform {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// `Z_k = sqrt(rho) W + sqrt(1 - rho) e_k`.
    EquicorrelatedNormal {
        rho: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

impl Default for PValueModel {
    fn default() -> Self {
        PValueModel::IndependentUniform { delta: default_delta() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub spec: GraphSpec,
    #[serde(default)]
    pub truth: BTreeMap<String, Truth>,
    #[serde(default)]
    pub model: PValueModel,
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub fwer_hat: f64,
    pub se: f64,
    pub rejections_per_hypothesis: BTreeMap<String, u64>,
    pub reps: u64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("no truth assignment for hypothesis {0}")]
    MissingTruth(String),
    #[error("truth assignment for unknown hypothesis {0}")]
    UnknownHypothesis(String),
    #[error("reps must be at least 1")]
    NoReplicates,
    #[error("rho = {0} must lie in [0, 1)")]
    Rho(f64),
    #[error("effect delta = {0} must be finite and nonnegative")]
    Delta(f64),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl SimConfig {
    /// All hypotheses true nulls, independent uniform p-values.
    pub fn global_null(spec: GraphSpec, reps: u64, seed: u64) -> Self {
        let truth = spec.labels().into_iter().map(|l| (l, Truth::TrueNull)).collect();
        SimConfig { spec, truth, model: PValueModel::default(), reps, seed }
    }

    /// String of `0`/`1` in declared hypothesis order, `1` marking a true null.
    pub fn truth_mask(&self) -> String {
        self.spec
            .labels()
            .iter()
            .map(|l| match self.truth.get(l) {
                Some(Truth::TrueNull) => '1',
                _ => '0',
            })
            .collect()
    }
}

/// Every truth assignment for the spec's hypotheses, `2^n` of them. Bit `k`
/// of the index set means hypothesis `k` (declared order) is a true null.
pub fn all_truth_assignments(spec: &GraphSpec) -> Vec<BTreeMap<String, Truth>> {
    let labels = spec.labels();
    assert!(labels.len() < 32, "too many hypotheses to enumerate truth masks");
    (0u32..1 << labels.len())
        .map(|mask| {
            labels
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    let t = if mask >> k & 1 == 1 { Truth::TrueNull } else { Truth::FalseNull };
                    (l.clone(), t)
                })
                .collect()
        })
        .collect()
}

struct Prepared {
    engine: Engine,
    true_null: Vec<bool>,
    rho: f64,
    delta: f64,
    correlated: bool,
}

fn prepare(config: &SimConfig) -> Result<Prepared, SimError> {
    if config.reps == 0 {
        return Err(SimError::NoReplicates);
    }
    let (rho, delta, correlated) = match config.model {
        PValueModel::IndependentUniform { delta } => (0.0, delta, false),
        PValueModel::EquicorrelatedNormal { rho, delta } => {
            if !(0.0..1.0).contains(&rho) {
                return Err(SimError::Rho(rho));
            }
            (rho, delta, true)
        }
    };
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(SimError::Delta(delta));
    }
    let engine = Engine::new(&config.spec)?;
    if let Some(extra) = config.truth.keys().find(|k| !engine.labels().contains(k)) {
        return Err(SimError::UnknownHypothesis(extra.clone()));
    }
    let true_null = engine
        .labels()
        .iter()
        .map(|l| match config.truth.get(l) {
            Some(t) => Ok(*t == Truth::TrueNull),
            None => Err(SimError::MissingTruth(l.clone())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared { engine, true_null, rho, delta, correlated })
}

/// Upper-tail normal probability.
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Clone)]
struct Tally {
    any_false_rejection: u64,
    per_hypothesis: Vec<u64>,
    p: Vec<f64>,
    rejected: Vec<bool>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            any_false_rejection: 0,
            per_hypothesis: vec![0; n],
            p: vec![0.0; n],
            rejected: vec![false; n],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.any_false_rejection += other.any_false_rejection;
        for (a, b) in self.per_hypothesis.iter_mut().zip(other.per_hypothesis) {
            *a += b;
        }
        self
    }
}

fn replicate(prep: &Prepared, base: &ChaCha8Rng, r: u64, tally: &mut Tally) {
    let mut rng = base.clone();
    rng.set_stream(r);
    let (a, b) = (prep.rho.sqrt(), (1.0 - prep.rho).sqrt());
    let common: f64 = if prep.correlated { rng.sample(StandardNormal) } else { 0.0 };
    for (p, &null) in tally.p.iter_mut().zip(&prep.true_null) {
        *p = if null && !prep.correlated {
            rng.random::<f64>()
        } else {
            let e: f64 = rng.sample(StandardNormal);
            let z = if prep.correlated { a * common + b * e } else { e };
            normal_sf(if null { z } else { z + prep.delta })
        };
    }
    prep.engine.run_indexed(&tally.p, &mut tally.rejected);
    let mut false_rejection = false;
    for ((count, &rej), &null) in tally.per_hypothesis.iter_mut().zip(&tally.rejected).zip(&prep.true_null) {
        if rej {
            *count += 1;
            false_rejection |= null;
        }
    }
    tally.any_false_rejection += u64::from(false_rejection);
}

pub fn simulate_fwer(config: &SimConfig) -> Result<SimResult, SimError> {
    let prep = prepare(config)?;
    let n = prep.true_null.len();
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let tally = (0..config.reps)
        .into_par_iter()
        .fold(
            || Tally::new(n),
            |mut t, r| {
                replicate(&prep, &base, r, &mut t);
                t
            },
        )
        .reduce(|| Tally::new(n), Tally::merge);
    let reps = config.reps;
    let fwer_hat = tally.any_false_rejection as f64 / reps as f64;
    Ok(SimResult {
        fwer_hat,
        se: (fwer_hat * (1.0 - fwer_hat) / reps as f64).sqrt(),
        rejections_per_hypothesis: prep.engine.labels().iter().cloned().zip(tally.per_hypothesis).collect(),
        reps,
        seed: config.seed,
    })
}

pub fn sweep(configs: &[SimConfig]) -> Vec<Result<SimResult, SimError>> {
    configs.iter().map(simulate_fwer).collect()
}

/// One CSV row per result: `truth_mask,fwer_hat,se,reps,seed`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[(String, SimResult)]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["truth_mask", "fwer_hat", "se", "reps", "seed"])?;
    for (mask, r) in rows {
        w.write_record([
            mask.clone(),
            r.fwer_hat.to_string(),
            r.se.to_string(),
            r.reps.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
