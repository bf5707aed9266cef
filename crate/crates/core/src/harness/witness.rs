//! Brute-force deviation searches. Each search reports the first strictly
//! profitable misreport it finds, or every one when asked for a full sweep.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::instances::random_graph;
use crate::ectai::{Aggregation, TIE_TOLERANCE};
use crate::error::Result;
use crate::graph::{NodeId, SocialGraph};
use crate::rational::{self, Rational};
use crate::tenm::{self, Budget, CostProfile, NotifierOutcome, TenmConfig};
use crate::wipd::{
    self, greedy_baseline, DemandPolicy, GreedyBid, TaskSet, ValuationOracle, ValuationTable, WipdConfig,
};

/// Tier-one mechanisms under deviation testing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tier1Mechanism {
    Tenm(TenmConfig),
    Ntbfm,
    Psm,
}

impl Tier1Mechanism {
    pub fn run(&self, graph: &SocialGraph, costs: &CostProfile, budget: &Budget) -> Result<NotifierOutcome> {
        match self {
            Tier1Mechanism::Tenm(cfg) => tenm::tenm_run(graph, costs, budget, cfg),
            Tier1Mechanism::Ntbfm => tenm::ntbfm(graph, costs, budget),
            Tier1Mechanism::Psm => tenm::psm(graph, costs, budget),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Tier1Mechanism::Tenm(_) => "tenm",
            Tier1Mechanism::Ntbfm => "ntbfm",
            Tier1Mechanism::Psm => "psm",
        }
    }
}

/// A random tier-one instance: graph, true costs and budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tier1Instance {
    pub graph: SocialGraph,
    pub costs: CostProfile,
    pub budget: Budget,
}

/// Shape of the random tier-one instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Tier1Shape {
    pub nodes: RangeInclusive<usize>,
    pub edge_prob: f64,
    pub costs: RangeInclusive<i64>,
    pub budget: RangeInclusive<i64>,
}

impl Tier1Shape {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Tier1Instance> {
        let n = rng.random_range(self.nodes.clone());
        let graph = random_graph(n, self.edge_prob, rng)?;
        let costs = CostProfile::uniform_integers(n, *self.costs.start(), *self.costs.end(), rng)?;
        let budget = Budget::from_integer(rng.random_range(self.budget.clone()))?;
        Ok(Tier1Instance { graph, costs, budget })
    }

    /// Instance `index` of the family seeded by `seed`.
    pub fn instance(&self, seed: u64, index: u64) -> Result<Tier1Instance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.sample(&mut rng)
    }
}

/// One misreported cost and what it earned against the truthful report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostDeviation {
    pub node: NodeId,
    #[serde(with = "rational::exact")]
    pub true_cost: Rational,
    #[serde(with = "rational::exact")]
    pub reported: Rational,
    #[serde(with = "rational::exact")]
    pub truthful_utility: Rational,
    #[serde(with = "rational::exact")]
    pub deviating_utility: Rational,
}

impl CostDeviation {
    pub fn gain(&self) -> Rational {
        self.deviating_utility - self.truthful_utility
    }
}

fn utility_of(outcome: &NotifierOutcome, node: NodeId, true_cost: &Rational) -> Rational {
    tenm::notifier_utility(true_cost, &outcome.payment(node), outcome.is_selected(node))
}

fn node_deviations(
    mech: &Tier1Mechanism,
    inst: &Tier1Instance,
    truthful: &NotifierOutcome,
    node: NodeId,
    grid: &RangeInclusive<i64>,
    first_only: bool,
) -> Result<Vec<CostDeviation>> {
    let Some(true_cost) = inst.costs.get(node).copied() else {
        return Ok(Vec::new());
    };
    let base = utility_of(truthful, node, &true_cost);
    let mut found = Vec::new();
    for r in grid.clone() {
        let reported = rational::int(r);
        if reported == true_cost {
            continue;
        }
        let out = mech.run(&inst.graph, &inst.costs.with_report(node, reported)?, &inst.budget)?;
        let u = utility_of(&out, node, &true_cost);
        if u > base {
            found.push(CostDeviation {
                node,
                true_cost,
                reported,
                truthful_utility: base,
                deviating_utility: u,
            });
            if first_only {
                break;
            }
        }
    }
    Ok(found)
}

/// Every strictly profitable single-device report on the integer `grid`,
/// ordered by node then report.
pub fn profitable_cost_deviations(
    mech: &Tier1Mechanism,
    inst: &Tier1Instance,
    grid: RangeInclusive<i64>,
) -> Result<Vec<CostDeviation>> {
    let truthful = mech.run(&inst.graph, &inst.costs, &inst.budget)?;
    let per_node: Vec<Vec<CostDeviation>> = inst
        .graph
        .nodes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| node_deviations(mech, inst, &truthful, n, &grid, false))
        .collect::<Result<_>>()?;
    Ok(per_node.into_iter().flatten().collect())
}

/// A profitable deviation found by a search over random instances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tier1Witness {
    pub instance_index: u64,
    pub instance: Tier1Instance,
    pub deviation: CostDeviation,
}

/// Scans instances `0..instances` in order and returns the first with a
/// strictly profitable report on `grid`.
pub fn search_tier1_witness(
    mech: &Tier1Mechanism,
    shape: &Tier1Shape,
    instances: u64,
    seed: u64,
    grid: RangeInclusive<i64>,
) -> Result<Option<Tier1Witness>> {
    for index in 0..instances {
        let instance = shape.instance(seed, index)?;
        let truthful = mech.run(&instance.graph, &instance.costs, &instance.budget)?;
        let nodes: Vec<NodeId> = instance.graph.nodes().collect();
        let hit = nodes
            .par_iter()
            .map(|&n| node_deviations(mech, &instance, &truthful, n, &grid, true))
            .find_map_first(|r| match r {
                Ok(v) if v.is_empty() => None,
                Ok(mut v) => Some(Ok(v.remove(0))),
                Err(e) => Some(Err(e)),
            });
        if let Some(dev) = hit {
            return Ok(Some(Tier1Witness {
                instance_index: index,
                instance,
                deviation: dev?,
            }));
        }
    }
    Ok(None)
}

/// Winner count of `mech` at each budget in turn.
pub fn winner_counts(
    mech: &Tier1Mechanism,
    graph: &SocialGraph,
    costs: &CostProfile,
    budgets: &[Rational],
) -> Result<Vec<usize>> {
    budgets
        .par_iter()
        .map(|b| Ok(mech.run(graph, costs, &Budget::new(*b)?)?.selected.len()))
        .collect()
}

/// A reviewer's misreport that moves the aggregate strictly closer to its
/// true peak.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakDeviation {
    pub reviewer: usize,
    pub true_peak: f64,
    pub reported: f64,
    pub truthful_aggregate: f64,
    pub deviating_aggregate: f64,
}

/// The `{0, step, 2·step, …, 1}` grid.
pub fn unit_grid(step: f64) -> Vec<f64> {
    let k = (1.0 / step).round() as usize;
    (0..=k).map(|i| i as f64 / k as f64).collect()
}

/// First reviewer (by index) and grid report that improves on truth by more
/// than [`TIE_TOLERANCE`].
pub fn profitable_peak_deviation(
    aggregation: Aggregation,
    peaks: &[f64],
    grid: &[f64],
) -> Result<Option<PeakDeviation>> {
    let truthful = aggregation.apply(peaks)?;
    let mut profile = peaks.to_vec();
    for (i, &alpha) in peaks.iter().enumerate() {
        let base = (truthful - alpha).abs();
        for &r in grid {
            profile[i] = r;
            let agg = aggregation.apply(&profile)?;
            if (agg - alpha).abs() < base - TIE_TOLERANCE {
                return Ok(Some(PeakDeviation {
                    reviewer: i,
                    true_peak: alpha,
                    reported: r,
                    truthful_aggregate: truthful,
                    deviating_aggregate: agg,
                }));
            }
        }
        profile[i] = alpha;
    }
    Ok(None)
}

/// Random profile of `3..=9` peaks uniform on `[0, 1]`, instance `index`.
pub fn random_peak_profile(seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let g = rng.random_range(3..=9);
    (0..g).map(|_| rng.random::<f64>()).collect()
}

/// GREEDY instance: each device asks for one bundle and values it privately.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyInstance {
    pub tasks: usize,
    pub true_bids: Vec<GreedyBid>,
}

/// `2..=4` devices over `1..=4` tasks with random non-empty bundles and
/// integer values in `1..=20`.
pub fn random_greedy_instance(seed: u64, index: u64) -> GreedyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let tasks = rng.random_range(1..=4usize);
    let devices = rng.random_range(2..=4usize);
    let true_bids = (0..devices)
        .map(|_| {
            let bits = rng.random_range(1..1u32 << tasks);
            GreedyBid {
                bundle: TaskSet::from_bits(bits),
                bid: rational::int(rng.random_range(1..=20)),
            }
        })
        .collect();
    GreedyInstance { tasks, true_bids }
}

/// A bid change that strictly raises the bidder's payment-minus-value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BidDeviation {
    pub device: usize,
    #[serde(with = "rational::exact")]
    pub true_value: Rational,
    #[serde(with = "rational::exact")]
    pub reported: Rational,
    #[serde(with = "rational::exact")]
    pub truthful_utility: Rational,
    #[serde(with = "rational::exact")]
    pub deviating_utility: Rational,
}

fn greedy_utility(inst: &GreedyInstance, bids: &[GreedyBid], device: usize) -> Result<Rational> {
    let out = greedy_baseline(inst.tasks, bids)?;
    let allocated = !out.allocation[device].is_empty();
    Ok(wipd::device_utility(
        &out.payments[device],
        &inst.true_bids[device].bid,
        allocated,
    ))
}

/// First device (by index) and factor for which inflating the bid pays.
pub fn profitable_bid_deviation(inst: &GreedyInstance, factors: &[Rational]) -> Result<Option<BidDeviation>> {
    for device in 0..inst.true_bids.len() {
        let base = greedy_utility(inst, &inst.true_bids, device)?;
        for f in factors {
            let mut bids = inst.true_bids.clone();
            bids[device].bid = inst.true_bids[device].bid * f;
            let u = greedy_utility(inst, &bids, device)?;
            if u > base {
                return Ok(Some(BidDeviation {
                    device,
                    true_value: inst.true_bids[device].bid,
                    reported: bids[device].bid,
                    truthful_utility: base,
                    deviating_utility: u,
                }));
            }
        }
    }
    Ok(None)
}

/// Outcome of scaling one device's reported valuation in WiPD.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScalingFinding {
    pub device: usize,
    #[serde(with = "rational::exact")]
    pub factor: Rational,
    /// Deviating minus truthful objective, measured on true values.
    #[serde(with = "rational::exact")]
    pub gain: Rational,
}

/// Runs WiPD with each device's report scaled by each factor and returns the
/// gains above `tolerance`, measured in the policy's own objective against
/// the true valuation.
pub fn wipd_scaling_probe(
    table: &ValuationTable,
    epsilon: &Rational,
    policy: DemandPolicy,
    factors: &[Rational],
    tolerance: &Rational,
) -> Result<Vec<ScalingFinding>> {
    let cfg = WipdConfig::new(*epsilon);
    let run = |t: ValuationTable| -> Result<wipd::AuctionOutcome> {
        let n = t.devices.len();
        let mut oracle = ValuationOracle::new(t, policy);
        let out = wipd::wipd_run(table.tasks, n, &mut oracle, &cfg)?;
        out.check_invariants(epsilon)?;
        Ok(out)
    };
    let truthful = run(table.clone())?;
    let objective = |out: &wipd::AuctionOutcome, i: usize| {
        wipd::policy_utility(&table.devices[i], out.allocation[i], &out.prices, policy)
    };
    let mut findings = Vec::new();
    for i in 0..table.devices.len() {
        let base = objective(&truthful, i);
        for f in factors {
            let mut t = table.clone();
            t.devices[i] = t.devices[i].scaled(f);
            let out = run(t)?;
            let gain = objective(&out, i) - base;
            if gain > *tolerance {
                findings.push(ScalingFinding {
                    device: i,
                    factor: *f,
                    gain,
                });
            }
        }
    }
    Ok(findings)
}
