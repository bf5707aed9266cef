use std::cmp::Ordering;

use num_traits::Zero;

use super::tasks::TaskSet;
use super::AuctionOutcome;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// A requested bundle and the bid for executing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyBid {
    pub bundle: TaskSet,
    pub bid: Rational,
}

/// `a.bid/√|a| < b.bid/√|b|` without square roots (bids are non-negative).
fn ratio_cmp(a: &GreedyBid, b: &GreedyBid) -> Ordering {
    let na = Rational::from_integer(a.bundle.len() as i128);
    let nb = Rational::from_integer(b.bundle.len() as i128);
    (a.bid * a.bid * nb).cmp(&(b.bid * b.bid * na))
}

/// Pay-as-bid baseline: visit devices by ascending `bid/√|bundle|` (lowest
/// index on ties) and accept each whose bundle is disjoint from those already
/// accepted.
pub fn greedy_baseline(tasks: usize, bids: &[GreedyBid]) -> Result<AuctionOutcome> {
    for (i, b) in bids.iter().enumerate() {
        if b.bundle.is_empty() {
            return Err(Error::domain(format!("device {i} requested an empty bundle")));
        }
        b.bundle.check_within(tasks)?;
        if b.bid < Rational::zero() {
            return Err(Error::domain(format!("device {i} bid is negative")));
        }
    }
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| ratio_cmp(&bids[a], &bids[b]).then(a.cmp(&b)));
    let mut allocation = vec![TaskSet::EMPTY; bids.len()];
    let mut payments = vec![Rational::zero(); bids.len()];
    let mut taken = TaskSet::EMPTY;
    for i in order {
        if bids[i].bundle.is_disjoint(taken) {
            taken = taken.union(bids[i].bundle);
            allocation[i] = bids[i].bundle;
            payments[i] = bids[i].bid;
        }
    }
    Ok(AuctionOutcome {
        allocation,
        payments,
        prices: vec![Rational::zero(); tasks],
        rounds: 1,
        trace: Vec::new(),
    })
}
