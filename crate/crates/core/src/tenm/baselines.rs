use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::{notified_by, Budget, CostProfile, NotifierOutcome};
use crate::error::Result;
use crate::graph::{NodeId, SocialGraph};
use crate::rational::Rational;

/// Pay-as-bid greedy: one static sort by initial notification per cost, then
/// take devices in order until the next report exceeds the remaining budget.
pub fn ntbfm(graph: &SocialGraph, costs: &CostProfile, budget: &Budget) -> Result<NotifierOutcome> {
    costs.check_covers(graph)?;
    let mut order: Vec<(Rational, NodeId, Rational)> = costs
        .eligible()
        .map(|(n, c)| (Rational::from_integer(graph.degree(n) as i128) / c, n, *c))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut remaining = *budget.amount();
    let mut selected = Vec::new();
    let mut payments = BTreeMap::new();
    for (ratio, node, cost) in order {
        if ratio.is_zero() || cost > remaining {
            break;
        }
        remaining -= cost;
        selected.push(node);
        payments.insert(node, cost);
    }
    Ok(NotifierOutcome {
        notified: notified_by(graph, &selected),
        selected,
        payments,
        delta: Rational::one(),
    })
}

/// Proportional share: the `k` cheapest devices with `c_k ≤ B/k` win and are
/// each paid `min(B/k, c_{k+1})`. Coverage plays no part in the choice.
pub fn psm(graph: &SocialGraph, costs: &CostProfile, budget: &Budget) -> Result<NotifierOutcome> {
    costs.check_covers(graph)?;
    let mut order: Vec<(Rational, NodeId)> = costs.eligible().map(|(n, c)| (*c, n)).collect();
    order.sort();

    let b = *budget.amount();
    let k = order
        .iter()
        .enumerate()
        .take_while(|(i, (c, _))| *c * Rational::from_integer(*i as i128 + 1) <= b)
        .count();
    let mut selected = Vec::with_capacity(k);
    let mut payments = BTreeMap::new();
    if k > 0 {
        let share = b / Rational::from_integer(k as i128);
        let pay = order.get(k).map_or(share, |(next, _)| share.min(*next));
        for &(_, node) in &order[..k] {
            selected.push(node);
            payments.insert(node, pay);
        }
    }
    Ok(NotifierOutcome {
        notified: notified_by(graph, &selected),
        selected,
        payments,
        delta: Rational::one(),
    })
}
