//! Tier one: budget-feasible selection of notifiers on a social graph.
//!
//! [`nam_select`] greedily picks the device with the largest marginal
//! notification per reported cost while its cost stays within a proportional
//! share of the budget. [`npm_prices`] pays every winner its threshold cost,
//! found by re-running the greedy scan without the winner as a candidate and
//! asking, position by position, how much the winner could have reported and
//! still been taken there. [`ntbfm`] (pay-as-bid, budget draining) and
//! [`psm`] (proportional share by cost alone) are the comparison baselines.

mod baselines;
mod greedy;

use std::collections::BTreeMap;
use std::io::Read;

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::rational::{self, Rational};

pub use baselines::{ntbfm, psm};
pub use greedy::{nam_select, npm_prices, payment_breakdown, PositionQuote};

/// Reported (or true) cost per node. Nodes without a cost never compete as
/// notifiers but can still be notified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostProfile {
    costs: Vec<Option<Rational>>,
}

impl CostProfile {
    /// One strictly positive cost per node.
    pub fn new(costs: Vec<Rational>) -> Result<Self> {
        Self::with_eligibility(costs.into_iter().map(Some).collect())
    }

    pub fn with_eligibility(costs: Vec<Option<Rational>>) -> Result<Self> {
        for (i, c) in costs.iter().enumerate() {
            if let Some(c) = c {
                if *c <= Rational::zero() {
                    return Err(Error::domain(format!("cost of node {i} must be positive, got {c}")));
                }
            }
        }
        Ok(CostProfile { costs })
    }

    pub fn from_integers(costs: &[i64]) -> Result<Self> {
        Self::new(costs.iter().map(|&c| rational::int(c)).collect())
    }

    /// Independent integer costs drawn uniformly from `lo..=hi`.
    pub fn uniform_integers<R: Rng>(n: usize, lo: i64, hi: i64, rng: &mut R) -> Result<Self> {
        if lo < 1 || lo > hi {
            return Err(Error::config(format!(
                "cost range [{lo}, {hi}] must satisfy 1 ≤ lo ≤ hi"
            )));
        }
        Self::new((0..n).map(|_| rational::int(rng.random_range(lo..=hi))).collect())
    }

    /// Reads `node_id,cost` rows keyed by the graph's original ids. A header
    /// row is allowed. Nodes absent from the file are not eligible.
    pub fn from_csv<R: Read>(graph: &SocialGraph, mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut costs = vec![None; graph.node_count()];
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: idx + 1, message };
            let (id, cost) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected node_id,cost".into()))?;
            let Ok(id) = id.trim().parse::<u64>() else {
                if idx == 0 {
                    continue; // header
                }
                return Err(parse_err(format!("invalid node id {id:?}")));
            };
            let node = graph
                .dense_id(id)
                .ok_or_else(|| parse_err(format!("node {id} is not in the graph")))?;
            let cost = rational::parse(cost).map_err(|_| parse_err(format!("invalid cost {cost:?}")))?;
            costs[node.index()] = Some(cost);
        }
        Self::with_eligibility(costs)
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn get(&self, node: NodeId) -> Option<&Rational> {
        self.costs.get(node.index()).and_then(Option::as_ref)
    }

    pub fn is_eligible(&self, node: NodeId) -> bool {
        self.get(node).is_some()
    }

    pub fn eligible(&self) -> impl Iterator<Item = (NodeId, &Rational)> + '_ {
        self.costs
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (NodeId(i as u32), c)))
    }

    /// Copy with one node's report replaced.
    pub fn with_report(&self, node: NodeId, cost: Rational) -> Result<Self> {
        let mut costs = self.costs.clone();
        *costs
            .get_mut(node.index())
            .ok_or_else(|| Error::domain(format!("unknown node {node}")))? = Some(cost);
        Self::with_eligibility(costs)
    }

    pub(crate) fn check_covers(&self, graph: &SocialGraph) -> Result<()> {
        if self.costs.len() != graph.node_count() {
            return Err(Error::domain(format!(
                "cost profile has {} entries but graph has {} nodes",
                self.costs.len(),
                graph.node_count()
            )));
        }
        Ok(())
    }
}

/// Public budget `B > 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Budget(Rational);

impl Budget {
    pub fn new(amount: Rational) -> Result<Self> {
        if amount <= Rational::zero() {
            return Err(Error::domain(format!("budget must be positive, got {amount}")));
        }
        Ok(Budget(amount))
    }

    pub fn from_integer(amount: i64) -> Result<Self> {
        Self::new(rational::int(amount))
    }

    pub fn amount(&self) -> &Rational {
        &self.0
    }
}

/// Where the Δ divisor applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaScope {
    /// Allocation threshold `B/Δ` and the pricing re-run and budget share
    /// both use `B/Δ`; payments are exact threshold costs for any Δ.
    #[default]
    Both,
    /// Only the allocation uses `B/Δ`; pricing uses the full `B`. For Δ > 1
    /// payments exceed the allocation's thresholds and the mechanism can be
    /// manipulated by losers that under-report.
    AllocationOnly,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TenmConfig {
    pub delta: Rational,
    pub delta_scope: DeltaScope,
}

impl Default for TenmConfig {
    fn default() -> Self {
        TenmConfig {
            delta: Rational::one(),
            delta_scope: DeltaScope::Both,
        }
    }
}

impl TenmConfig {
    pub fn with_delta(delta: Rational) -> Self {
        TenmConfig {
            delta,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.delta <= Rational::zero() {
            return Err(Error::config(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }

    pub(crate) fn allocation_share(&self, budget: &Budget) -> Rational {
        budget.amount() / self.delta
    }

    pub(crate) fn pricing_share(&self, budget: &Budget) -> Rational {
        match self.delta_scope {
            DeltaScope::Both => budget.amount() / self.delta,
            DeltaScope::AllocationOnly => *budget.amount(),
        }
    }
}

/// Selected notifiers in greedy order, the devices they notify, and payments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotifierOutcome {
    pub selected: Vec<NodeId>,
    /// Ascending.
    pub notified: Vec<NodeId>,
    pub payments: BTreeMap<NodeId, Rational>,
    pub delta: Rational,
}

impl NotifierOutcome {
    pub fn empty(delta: Rational) -> Self {
        NotifierOutcome {
            selected: Vec::new(),
            notified: Vec::new(),
            payments: BTreeMap::new(),
            delta,
        }
    }

    pub fn total_payment(&self) -> Rational {
        self.payments.values().fold(Rational::zero(), |acc, p| acc + p)
    }

    pub fn is_selected(&self, node: NodeId) -> bool {
        self.payments.contains_key(&node)
    }

    pub fn payment(&self, node: NodeId) -> Rational {
        self.payments.get(&node).copied().unwrap_or_else(Rational::zero)
    }

    /// Payments defined exactly on the winners, total within budget, and every
    /// winner paid at least its report.
    pub fn check_invariants(&self, costs: &CostProfile, budget: &Budget) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for node in &self.selected {
            if !seen.insert(*node) {
                return Err(Error::Invariant(format!("node {node} selected twice")));
            }
            let paid = self
                .payments
                .get(node)
                .ok_or_else(|| Error::Invariant(format!("winner {node} has no payment")))?;
            let reported = costs
                .get(*node)
                .ok_or_else(|| Error::Invariant(format!("winner {node} has no reported cost")))?;
            if paid < reported {
                return Err(Error::Invariant(format!(
                    "winner {node} paid {paid} below its report {reported}"
                )));
            }
        }
        if self.payments.len() != self.selected.len() {
            return Err(Error::Invariant("payments defined for non-winners".into()));
        }
        let total = self.total_payment();
        if &total > budget.amount() {
            return Err(Error::Invariant(format!(
                "total payment {total} exceeds budget {}",
                budget.amount()
            )));
        }
        Ok(())
    }
}

/// Allocation followed by threshold pricing.
pub fn tenm_run(
    graph: &SocialGraph,
    costs: &CostProfile,
    budget: &Budget,
    config: &TenmConfig,
) -> Result<NotifierOutcome> {
    let (selected, notified) = nam_select(graph, costs, budget, config)?;
    let payments = npm_prices(graph, costs, budget, config, &selected)?;
    Ok(NotifierOutcome {
        selected,
        notified,
        payments,
        delta: config.delta,
    })
}

/// Utility of a tier-one device: payment minus true cost when selected.
pub fn notifier_utility(true_cost: &Rational, payment: &Rational, selected: bool) -> Rational {
    if selected {
        payment - true_cost
    } else {
        Rational::zero()
    }
}

/// Union of the winners' neighbourhoods, ascending.
pub(crate) fn notified_by(graph: &SocialGraph, winners: &[NodeId]) -> Vec<NodeId> {
    let mut state = graph.coverage_oracle().session();
    for &w in winners {
        state.add(w);
    }
    state.covered_nodes()
}
