#![allow(dead_code)]

use std::collections::BTreeMap;

use gatekeep::graph::{FamilySpec, GraphSpec, TransitionCoefficients};
use gatekeep::procedures::LocalProcedureSpec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn pmap(labels: &[String], p: &[f64]) -> BTreeMap<String, f64> {
    labels.iter().cloned().zip(p.iter().copied()).collect()
}

/// P-values concentrated near typical critical values so that partial
/// rejections and transfers happen often.
pub fn random_pvalues(rng: &mut impl Rng, n: usize, alpha: f64) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=5 => rng.random::<f64>() * alpha,
            6..=7 => rng.random::<f64>() * 2.0 * alpha,
            _ => rng.random::<f64>(),
        })
        .collect()
}

pub fn random_procedure(rng: &mut impl Rng, hyps: &[String]) -> LocalProcedureSpec {
    let gamma = rng.random::<f64>() * 0.99;
    match rng.random_range(0..8) {
        0 => LocalProcedureSpec::bonferroni(),
        1 => LocalProcedureSpec::bonferroni().with_weights(random_weights(rng, hyps.len())),
        2 => LocalProcedureSpec::holm(),
        3 => LocalProcedureSpec::holm().with_weights(random_weights(rng, hyps.len())),
        4 => LocalProcedureSpec::truncated_holm(gamma),
        5 => LocalProcedureSpec::hochberg(),
        6 => LocalProcedureSpec::truncated_hochberg(gamma),
        _ => {
            let mut order = hyps.to_vec();
            order.shuffle(rng);
            LocalProcedureSpec::fixed_sequence(order)
        }
    }
}

/// Nonnegative weights summing to exactly 1 in floating point.
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

/// A random valid spec: 1 to 3 layers, 1 to 2 families per layer, 1 to 4
/// hypotheses per family, random procedures, initial values and forward
/// coefficients.
pub fn random_spec(rng: &mut impl Rng) -> GraphSpec {
    let alpha = 0.05;
    let mut layers = Vec::new();
    let mut ids = Vec::new();
    let mut h = 0;
    for i in 0..rng.random_range(1..=3) {
        let mut layer = Vec::new();
        for j in 0..rng.random_range(1..=2) {
            let hyps: Vec<String> = (0..rng.random_range(1..=4))
                .map(|_| {
                    h += 1;
                    format!("H{h}")
                })
                .collect();
            let proc = random_procedure(rng, &hyps);
            let id = format!("F{}{}", i + 1, j + 1);
            ids.push((i, id.clone()));
            layer.push(FamilySpec::new(id, hyps, 0.0, proc));
        }
        layers.push(layer);
    }
    // Initial values: a random share of alpha, split over random families.
    let m = ids.len();
    let raw: Vec<f64> = (0..m).map(|k| if k == 0 || rng.random_bool(0.4) { rng.random::<f64>() } else { 0.0 }).collect();
    let total: f64 = raw.iter().sum::<f64>() / rng.random_range(0.7..=1.0);
    let mut k = 0;
    for layer in &mut layers {
        for fam in layer {
            fam.alpha = alpha * raw[k] / total;
            k += 1;
        }
    }
    let mut transitions = TransitionCoefficients::new();
    for (a, (la, from)) in ids.iter().enumerate() {
        let later: Vec<&String> = ids[a + 1..].iter().filter(|(lb, _)| lb > la).map(|(_, id)| id).collect();
        if later.is_empty() {
            continue;
        }
        let budget = if rng.random_bool(0.7) { 1.0 } else { rng.random::<f64>() };
        let shares: Vec<f64> = later.iter().map(|_| rng.random::<f64>()).collect();
        let sum: f64 = shares.iter().sum();
        for (to, s) in later.into_iter().zip(shares) {
            let g = (budget * s / sum).min(1.0) * (1.0 - 1e-15);
            transitions.insert(from, to, g);
        }
    }
    GraphSpec { alpha, layers, transitions }
}
