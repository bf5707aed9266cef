//! One-hop notification estimates: each neighbour of a notifier hears about
//! the task independently with probability `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};

/// Trials per independent RNG stream in the Monte Carlo estimators.
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NotifyModel {
    pub degree: usize,
    pub p: f64,
}

impl NotifyModel {
    pub fn new(degree: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(NotifyModel { degree, p })
    }
}

/// `|Z|·p`.
pub fn expected_notified(model: &NotifyModel) -> f64 {
    model.degree as f64 * model.p
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AtLeastOne {
    /// `1 − (1−p)^|Z|`.
    pub exact: f64,
    /// `1 − e^{−|Z|·p}`; never above `exact` since `1 − p ≤ e^{−p}`.
    pub bound: f64,
}

pub fn at_least_one(model: &NotifyModel) -> AtLeastOne {
    let z = model.degree as f64;
    AtLeastOne {
        exact: 1.0 - (1.0 - model.p).powf(z),
        bound: 1.0 - (-z * model.p).exp(),
    }
}

/// Chernoff upper bound on `Pr{X > (1+κ)E}`: `e^{(1+κ)E} / (1+κ)^{(1+κ)E}`.
pub fn chernoff_tail(expectation: f64, kappa: f64) -> Result<f64> {
    if expectation <= 0.0 || kappa <= -1.0 || !expectation.is_finite() || !kappa.is_finite() {
        return Err(Error::domain(format!(
            "need E > 0 and κ > −1, got E={expectation}, κ={kappa}"
        )));
    }
    let a = (1.0 + kappa) * expectation;
    Ok((a - a * (1.0 + kappa).ln()).exp())
}

/// `e^t / t^t`, the tail bound at threshold `t` when `E[X] = 1`.
pub fn tail_at(t: f64) -> Result<f64> {
    chernoff_tail(1.0, t - 1.0)
}

/// `√d · ln d`.
pub fn lemma1_threshold(degree: usize) -> f64 {
    let d = degree as f64;
    d.sqrt() * d.ln()
}

/// Bound on the probability that a device of this degree notifies more
/// than `√d · ln d` neighbours. Needs `d > 2`.
pub fn lemma1_bound(degree: usize) -> Result<f64> {
    if degree <= 2 {
        return Err(Error::domain(format!("degree must exceed 2, got {degree}")));
    }
    tail_at(lemma1_threshold(degree))
}

/// Notified counts for `trials` independent runs, in trial order. Trials are
/// simulated in fixed-size chunks, each with its own RNG stream, so the
/// result does not depend on the thread schedule.
pub fn sample_notified(model: &NotifyModel, trials: usize, seed: u64) -> Vec<u32> {
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            (0..n)
                .map(|_| (0..model.degree).filter(|_| rng.random_bool(model.p)).count() as u32)
                .collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(samples: &[u32]) -> Self {
        let n = samples.len() as f64;
        let sum: u64 = samples.iter().map(|&x| x as u64).sum();
        let sum_sq: u64 = samples.iter().map(|&x| (x as u64) * (x as u64)).sum();
        let mean = sum as f64 / n;
        let var = if samples.len() > 1 {
            ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MonteCarloEstimate {
            mean,
            stderr: (var / n).sqrt(),
            trials: samples.len(),
        }
    }

    /// `|mean − target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Empirical mean number of neighbours of `node` notified with probability `p`.
pub fn monte_carlo_notified(
    graph: &SocialGraph,
    node: NodeId,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    graph.check_node(node)?;
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let model = NotifyModel::new(graph.degree(node), p)?;
    Ok(MonteCarloEstimate::from_samples(&sample_notified(&model, trials, seed)))
}

/// Fraction of samples strictly above `threshold`.
pub fn empirical_tail(samples: &[u32], threshold: f64) -> f64 {
    samples.iter().filter(|&&x| x as f64 > threshold).count() as f64 / samples.len() as f64
}
