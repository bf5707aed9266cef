use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use num_traits::Zero;
use rayon::prelude::*;

use super::{Budget, CostProfile, TenmConfig};
use crate::error::{Error, Result};
use crate::graph::{CoverState, NodeId, SocialGraph};
use crate::rational::Rational;

/// Heap entry with a possibly stale gain. Ordered by ratio, then lower id first.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    ratio: Rational,
    node: NodeId,
    gain: usize,
    stamp: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ratio.cmp(&other.ratio).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The candidate examined at one greedy position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Candidate {
    pub node: NodeId,
    pub gain: usize,
    pub cost: Rational,
}

/// Lazy greedy over marginal notification per cost.
///
/// Gains only shrink as the covered set grows, so a stale heap key is an
/// upper bound; the top entry is the exact argmax once it is fresh.
pub(crate) struct GreedyScan<'g, 'c> {
    costs: &'c CostProfile,
    state: CoverState<'g>,
    heap: BinaryHeap<Entry>,
    round: usize,
}

impl<'g, 'c> GreedyScan<'g, 'c> {
    pub fn new(graph: &'g SocialGraph, costs: &'c CostProfile, exclude: Option<NodeId>) -> Self {
        let heap = costs
            .eligible()
            .filter(|(node, _)| Some(*node) != exclude)
            .map(|(node, cost)| {
                let gain = graph.degree(node);
                Entry {
                    ratio: Rational::from_integer(gain as i128) / cost,
                    node,
                    gain,
                    stamp: 0,
                }
            })
            .collect();
        GreedyScan {
            costs,
            state: graph.coverage_oracle().session(),
            heap,
            round: 0,
        }
    }

    /// Current argmax without removing it.
    pub fn best(&mut self) -> Option<Candidate> {
        loop {
            let top = self.heap.peek()?;
            if top.stamp == self.round {
                return Some(Candidate {
                    node: top.node,
                    gain: top.gain,
                    cost: *self.costs.get(top.node).expect("eligible"),
                });
            }
            let mut entry = self.heap.pop().expect("peeked");
            entry.gain = self.state.gain(entry.node);
            entry.ratio = Rational::from_integer(entry.gain as i128) / self.costs.get(entry.node).expect("eligible");
            entry.stamp = self.round;
            self.heap.push(entry);
        }
    }

    /// Takes the candidate last returned by [`best`](Self::best).
    pub fn accept(&mut self, node: NodeId) {
        let top = self.heap.pop().expect("accept after best");
        debug_assert_eq!(top.node, node);
        self.state.add(node);
        self.round += 1;
    }

    pub fn state(&self) -> &CoverState<'g> {
        &self.state
    }
}

/// `cost ≤ share · gain / (covered + gain)`, cross-multiplied.
fn passes_threshold(candidate: &Candidate, covered: usize, share: &Rational) -> bool {
    let gain = Rational::from_integer(candidate.gain as i128);
    let total = Rational::from_integer((covered + candidate.gain) as i128);
    candidate.cost * total <= share * gain
}

/// Greedy allocation: returns the winners in selection order and the
/// notified set (ascending).
pub fn nam_select(
    graph: &SocialGraph,
    costs: &CostProfile,
    budget: &Budget,
    config: &TenmConfig,
) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
    config.validate()?;
    costs.check_covers(graph)?;
    let share = config.allocation_share(budget);
    let mut scan = GreedyScan::new(graph, costs, None);
    let mut selected = Vec::new();
    while let Some(c) = scan.best() {
        if c.gain == 0 || !passes_threshold(&c, scan.state().covered_count(), &share) {
            break;
        }
        scan.accept(c.node);
        selected.push(c.node);
    }
    Ok((selected, scan.state().covered_nodes()))
}

/// One position of a winner's threshold computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionQuote {
    /// 1-based position in the re-run.
    pub position: usize,
    /// Device occupying the position in the re-run; the last position holds
    /// the first rejected candidate, if any.
    pub reference: Option<NodeId>,
    /// Winner's marginal notification given the first `position − 1` picks.
    pub winner_gain: usize,
    /// Highest report beating the reference's ratio; `None` is unbounded.
    pub ratio_cap: Option<Rational>,
    /// Budget share available at this position.
    pub share_cap: Rational,
}

impl PositionQuote {
    pub fn value(&self) -> Rational {
        if self.winner_gain == 0 {
            return Rational::zero();
        }
        match &self.ratio_cap {
            Some(cap) => *cap.min(&self.share_cap),
            None => self.share_cap,
        }
    }
}

fn quote(
    position: usize,
    reference: Option<&Candidate>,
    winner_gain: usize,
    covered: usize,
    share: &Rational,
) -> PositionQuote {
    let h = Rational::from_integer(winner_gain as i128);
    if winner_gain == 0 {
        return PositionQuote {
            position,
            reference: reference.map(|c| c.node),
            winner_gain,
            ratio_cap: Some(Rational::zero()),
            share_cap: Rational::zero(),
        };
    }
    let share_cap = share * h / Rational::from_integer((covered + winner_gain) as i128);
    let ratio_cap = reference
        .filter(|c| c.gain > 0)
        .map(|c| h * c.cost / Rational::from_integer(c.gain as i128));
    PositionQuote {
        position,
        reference: reference.map(|c| c.node),
        winner_gain,
        ratio_cap,
        share_cap,
    }
}

/// Re-runs the greedy scan without `winner` as a candidate and quotes every
/// position `1..=|S'|+1`. With `stop_early`, quotes stop once the budget
/// share (non-increasing in the position) can no longer raise the maximum.
fn quotes_for(
    graph: &SocialGraph,
    costs: &CostProfile,
    winner: NodeId,
    rerun_share: &Rational,
    pay_share: &Rational,
    stop_early: bool,
) -> Vec<PositionQuote> {
    let mut scan = GreedyScan::new(graph, costs, Some(winner));
    let mut quotes = Vec::new();
    let mut best = Rational::zero();
    loop {
        let covered = scan.state().covered_count();
        let winner_gain = scan.state().gain(winner);
        let candidate = scan.best();
        let q = quote(quotes.len() + 1, candidate.as_ref(), winner_gain, covered, pay_share);
        let share_cap = q.share_cap;
        best = best.max(q.value());
        quotes.push(q);
        let Some(c) = candidate else { break };
        if c.gain == 0 || !passes_threshold(&c, covered, rerun_share) {
            break;
        }
        if stop_early && (winner_gain == 0 || share_cap <= best) {
            break;
        }
        scan.accept(c.node);
    }
    quotes
}

/// Per-position breakdown of one winner's payment.
pub fn payment_breakdown(
    graph: &SocialGraph,
    costs: &CostProfile,
    budget: &Budget,
    config: &TenmConfig,
    winner: NodeId,
) -> Result<Vec<PositionQuote>> {
    config.validate()?;
    costs.check_covers(graph)?;
    graph.check_node(winner)?;
    let share = config.pricing_share(budget);
    Ok(quotes_for(graph, costs, winner, &share, &share, false))
}

/// Threshold payments for `selected`. Each winner is priced independently;
/// results are keyed by node so the merge order is irrelevant.
pub fn npm_prices(
    graph: &SocialGraph,
    costs: &CostProfile,
    budget: &Budget,
    config: &TenmConfig,
    selected: &[NodeId],
) -> Result<BTreeMap<NodeId, Rational>> {
    config.validate()?;
    costs.check_covers(graph)?;
    for &w in selected {
        graph.check_node(w)?;
        if !costs.is_eligible(w) {
            return Err(Error::domain(format!("winner {w} has no reported cost")));
        }
    }
    let share = config.pricing_share(budget);
    Ok(selected
        .par_iter()
        .map(|&w| {
            let pay = quotes_for(graph, costs, w, &share, &share, true)
                .iter()
                .map(PositionQuote::value)
                .max()
                .unwrap_or_else(Rational::zero);
            (w, pay)
        })
        .collect())
}
