use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::rational::{self, Rational};
use crate::wipd::{Valuation, ValuationTable};

/// Erdős–Rényi `G(n, p)` on dense ids `0..n`.
pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<SocialGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    SocialGraph::from_dense_edges(n, edges)
}

/// Uniform `G(n, m)`: exactly `m` distinct undirected edges on `0..n`.
pub fn random_graph_with_edges(n: usize, m: usize, seed: u64) -> Result<SocialGraph> {
    let possible = n.saturating_mul(n.saturating_sub(1)) / 2;
    if m > possible {
        return Err(Error::config(format!("{m} edges do not fit on {n} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    while edges.len() < m {
        let u = rng.random_range(0..n as u32);
        let v = rng.random_range(0..n as u32);
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    SocialGraph::from_dense_edges(n, edges)
}

/// Where per-device values come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ValueDistribution {
    /// Integers uniform on `lo..=hi`.
    Uniform { lo: i64, hi: i64 },
    /// Normal draws rounded to the nearest integer and clamped to `lo..=hi`.
    Normal { mu: f64, sigma: f64, lo: i64, hi: i64 },
}

impl ValueDistribution {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range();
        if lo < 0 || lo > hi {
            return Err(Error::config(format!(
                "value range [{lo}, {hi}] must satisfy 0 ≤ lo ≤ hi"
            )));
        }
        if let ValueDistribution::Normal { mu, sigma, .. } = *self {
            if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
                return Err(Error::config(format!(
                    "invalid normal parameters mu={mu}, sigma={sigma}"
                )));
            }
        }
        Ok(())
    }

    pub fn range(&self) -> (i64, i64) {
        match *self {
            ValueDistribution::Uniform { lo, hi } | ValueDistribution::Normal { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        match *self {
            ValueDistribution::Uniform { lo, hi } => rng.random_range(lo..=hi),
            ValueDistribution::Normal { mu, sigma, lo, hi } => {
                let x = Normal::new(mu, sigma).expect("validated parameters").sample(rng);
                (x.round() as i64).clamp(lo, hi)
            }
        }
    }
}

/// Additive integer valuations, one row per device.
pub fn random_additive_table<R: Rng>(
    devices: usize,
    tasks: usize,
    dist: &ValueDistribution,
    rng: &mut R,
) -> Result<ValuationTable> {
    dist.validate()?;
    let rows: Vec<Vec<i64>> = (0..devices)
        .map(|_| (0..tasks).map(|_| dist.sample(rng)).collect())
        .collect();
    ValuationTable::additive_integers(tasks, &rows)
}

/// `⌈fraction · n⌉` distinct indices, ascending.
pub fn pick_deviators<R: Rng>(n: usize, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!("deviation fraction {fraction} outside [0, 1]")));
    }
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    let mut picked = index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Report multiplied by `factor` (exact).
pub fn inflate(v: &Valuation, factor: &Rational) -> Valuation {
    v.scaled(factor)
}

/// `max(c − δ, floor)`.
pub fn lower_cost(cost: &Rational, delta: &Rational, floor: &Rational) -> Rational {
    (cost - delta).max(*floor)
}

/// Default inflation factor for WiPD and GREEDY deviators.
pub fn default_inflation() -> Rational {
    rational::ratio(6, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn gnm_has_exact_edge_count() {
        let g = random_graph_with_edges(50, 300, 1).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (50, 300));
        assert_eq!(g, random_graph_with_edges(50, 300, 1).unwrap());
        assert!(random_graph_with_edges(3, 4, 1).is_err());
    }

    #[test]
    fn gnp_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(random_graph(6, 0.0, &mut rng).unwrap().edge_count(), 0);
        assert_eq!(random_graph(6, 1.0, &mut rng).unwrap().edge_count(), 15);
        assert!(random_graph(6, 1.5, &mut rng).is_err());
    }

    #[test]
    fn deviator_count_is_ceiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(pick_deviators(10, 0.3, &mut rng).unwrap().len(), 3);
        assert_eq!(pick_deviators(11, 0.3, &mut rng).unwrap().len(), 4);
        assert!(pick_deviators(10, 0.0, &mut rng).unwrap().is_empty());
        assert_eq!(pick_deviators(10, 1.0, &mut rng).unwrap(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn lowering_respects_floor() {
        assert_eq!(lower_cost(&int(20), &int(5), &int(1)), int(15));
        assert_eq!(lower_cost(&int(3), &int(5), &int(1)), int(1));
    }

    #[test]
    fn normal_values_stay_in_range() {
        let d = ValueDistribution::Normal {
            mu: 37.0,
            sigma: 8.0,
            lo: 30,
            hi: 45,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_additive_table(20, 4, &d, &mut rng).unwrap();
        for v in &t.devices {
            let Valuation::Additive(vals) = v else { panic!() };
            assert!(vals.iter().all(|x| *x >= int(30) && *x <= int(45)));
        }
    }
}
