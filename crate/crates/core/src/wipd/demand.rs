use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tasks::TaskSet;
use super::valuation::{Valuation, ValuationTable};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Exhaustive demand queries enumerate at most `2^20` bundles.
pub const DEMAND_TASK_CAP: usize = 20;

/// Below this many free tasks the enumeration stays on the calling thread.
const PARALLEL_FROM: usize = 13;

/// How a device chooses the extra tasks it asks for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandPolicy {
    /// Minimise what the held bundle costs at the raised prices minus what it
    /// is worth: `Σ_{S}ρ + Σ_{F}(ρ+ε) − v(S∪F)`.
    #[default]
    PaperLiteral,
    /// Maximise the change in `payment − valuation` from adding `F` to the
    /// current holding: `Σ_{F}(ρ+ε) − (v(S∪F) − v(S))`.
    NetGain,
}

/// Score to maximise; ties resolved by [`TaskSet::tie_order`].
fn score(
    v: &Valuation,
    holdings: TaskSet,
    held_value: &Rational,
    f: TaskSet,
    prices: &[Rational],
    epsilon: &Rational,
    policy: DemandPolicy,
) -> Rational {
    let raised = f
        .iter()
        .fold(Rational::zero(), |acc, t| acc + prices[t.0 as usize] + epsilon);
    let value = v.value(holdings.union(f));
    match policy {
        DemandPolicy::PaperLiteral => value - raised,
        DemandPolicy::NetGain => raised - (value - held_value),
    }
}

fn better(a: &(Rational, TaskSet), b: &(Rational, TaskSet)) -> bool {
    match a.0.cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1.tie_order(b.1) == Ordering::Less,
    }
}

/// Spreads the bits of `idx` over the set bits of `mask`.
fn deposit(idx: u32, mask: TaskSet) -> TaskSet {
    let mut out = 0u32;
    let mut m = mask.bits();
    let mut i = idx;
    while m != 0 {
        let low = m & m.wrapping_neg();
        if i & 1 == 1 {
            out |= low;
        }
        i >>= 1;
        m &= m - 1;
    }
    TaskSet::from_bits(out)
}

/// Best bundle of unheld tasks under `policy`, by enumeration. The empty
/// bundle wins every tie, so a device only asks when it strictly gains.
pub fn brute_force_demand(
    v: &Valuation,
    tasks: usize,
    holdings: TaskSet,
    prices: &[Rational],
    epsilon: &Rational,
    policy: DemandPolicy,
) -> Result<TaskSet> {
    if tasks > DEMAND_TASK_CAP {
        return Err(Error::config(format!(
            "demand enumeration supports at most {DEMAND_TASK_CAP} tasks, got {tasks}"
        )));
    }
    if prices.len() != tasks {
        return Err(Error::domain(format!("{} prices for {tasks} tasks", prices.len())));
    }
    let free = TaskSet::full(tasks).difference(holdings);
    let held_value = v.value(holdings);
    let eval = |f: TaskSet| (score(v, holdings, &held_value, f, prices, epsilon, policy), f);
    let pick = |a: (Rational, TaskSet), b: (Rational, TaskSet)| if better(&b, &a) { b } else { a };
    let best = if free.len() >= PARALLEL_FROM {
        (0..1u32 << free.len())
            .into_par_iter()
            .map(|i| eval(deposit(i, free)))
            .reduce(|| eval(TaskSet::EMPTY), pick)
    } else {
        free.subsets().map(eval).fold(eval(TaskSet::EMPTY), pick)
    };
    Ok(best.1)
}

/// What the auction tells a device when asking for its demand.
#[derive(Clone, Copy, Debug)]
pub struct DemandContext<'a> {
    /// 1-based pass number.
    pub pass: usize,
    pub device: usize,
    pub tasks: usize,
    pub holdings: TaskSet,
    pub prices: &'a [Rational],
    pub epsilon: &'a Rational,
}

pub trait DemandOracle {
    fn demand(&mut self, ctx: &DemandContext<'_>) -> Result<TaskSet>;

    /// Pass guard used when the caller sets none.
    fn default_max_rounds(&self, tasks: usize, epsilon: &Rational) -> usize;
}

/// `⌈V·m/ε⌉ + m` for the largest full-bundle value `V`.
pub fn default_max_rounds(max_value: &Rational, tasks: usize, epsilon: &Rational) -> usize {
    let m = Rational::from_integer(tasks as i128);
    crate::rational::ceil_to_usize(&(max_value * m / epsilon)) + tasks
}

/// Demands computed from valuations by enumeration.
#[derive(Clone, Debug)]
pub struct ValuationOracle {
    pub table: ValuationTable,
    pub policy: DemandPolicy,
}

impl ValuationOracle {
    pub fn new(table: ValuationTable, policy: DemandPolicy) -> Self {
        ValuationOracle { table, policy }
    }
}

impl DemandOracle for ValuationOracle {
    fn demand(&mut self, ctx: &DemandContext<'_>) -> Result<TaskSet> {
        let v = self
            .table
            .devices
            .get(ctx.device)
            .ok_or_else(|| Error::domain(format!("no valuation for device {}", ctx.device)))?;
        brute_force_demand(v, ctx.tasks, ctx.holdings, ctx.prices, ctx.epsilon, self.policy)
    }

    fn default_max_rounds(&self, tasks: usize, epsilon: &Rational) -> usize {
        default_max_rounds(&self.table.max_value(), tasks, epsilon)
    }
}

/// Replays `(pass, device) → F`; anything off-script demands nothing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScriptedOracle {
    steps: BTreeMap<(usize, usize), TaskSet>,
}

impl ScriptedOracle {
    pub fn new(steps: impl IntoIterator<Item = (usize, usize, TaskSet)>) -> Self {
        ScriptedOracle {
            steps: steps.into_iter().map(|(p, d, f)| ((p, d), f)).collect(),
        }
    }

    pub fn last_pass(&self) -> usize {
        self.steps.keys().map(|(p, _)| *p).max().unwrap_or(0)
    }
}

impl DemandOracle for ScriptedOracle {
    fn demand(&mut self, ctx: &DemandContext<'_>) -> Result<TaskSet> {
        Ok(self.steps.get(&(ctx.pass, ctx.device)).copied().unwrap_or_default())
    }

    fn default_max_rounds(&self, _tasks: usize, _epsilon: &Rational) -> usize {
        self.last_pass() + 1
    }
}
