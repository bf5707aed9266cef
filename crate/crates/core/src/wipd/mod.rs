//! Tier two, second stage: ε-increment ascending auction over heterogeneous
//! tasks.
//!
//! Devices are visited in ascending order, pass after pass. A device asks for
//! a bundle `F` of tasks it does not hold; it takes them from their current
//! holders and each task in `F` becomes `ε` dearer. The auction ends after a
//! pass in which nobody asks for anything, and each device is paid the final
//! prices of the tasks it holds. [`greedy_baseline`] is the pay-as-bid
//! comparison and [`gs_check`] tests valuations for gross substitutes.

mod demand;
mod greedy;
mod gs;
mod tasks;
mod valuation;

use std::io::Write;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub use demand::{
    brute_force_demand, default_max_rounds, DemandContext, DemandOracle, DemandPolicy, ScriptedOracle, ValuationOracle,
    DEMAND_TASK_CAP,
};
pub use greedy::{greedy_baseline, GreedyBid};
pub use gs::{gs_check, GsReport, GsWitness, GS_TASK_CAP};
pub use tasks::{TaskId, TaskSet, MAX_TASKS};
pub use valuation::{Valuation, ValuationTable};

/// One accepted demand: who asked for what, and the prices right after.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub pass: usize,
    pub device: usize,
    pub demanded: TaskSet,
    #[serde(with = "exact_vec")]
    pub prices: Vec<Rational>,
}

mod exact_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::rational::{self, Rational};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&rational::to_exact_string(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|t| rational::parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Writes `pass,device,demanded,prices` rows; sets and price vectors are
/// `;`-separated.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "pass,device,demanded,prices")?;
    for r in trace {
        let prices: Vec<String> = r.prices.iter().map(rational::to_exact_string).collect();
        writeln!(out, "{},{},{},{}", r.pass, r.device, r.demanded, prices.join(";"))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WipdConfig {
    pub epsilon: Rational,
    /// Pass guard; the oracle's default when `None`.
    pub max_rounds: Option<usize>,
}

impl WipdConfig {
    pub fn new(epsilon: Rational) -> Self {
        WipdConfig {
            epsilon,
            max_rounds: None,
        }
    }
}

/// Prices and holdings between device turns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionState {
    pub prices: Vec<Rational>,
    pub holdings: Vec<TaskSet>,
    pub epsilon: Rational,
    pub pass: usize,
}

impl AuctionState {
    fn new(tasks: usize, devices: usize, epsilon: Rational) -> Self {
        AuctionState {
            prices: vec![Rational::zero(); tasks],
            holdings: vec![TaskSet::EMPTY; devices],
            epsilon,
            pass: 0,
        }
    }

    fn take(&mut self, device: usize, f: TaskSet) {
        for (i, h) in self.holdings.iter_mut().enumerate() {
            if i != device {
                *h = h.difference(f);
            }
        }
        self.holdings[device] = self.holdings[device].union(f);
        for t in f.iter() {
            self.prices[t.0 as usize] += self.epsilon;
        }
    }

    pub fn bundle_price(&self, set: TaskSet) -> Rational {
        set.iter()
            .fold(Rational::zero(), |acc, t| acc + self.prices[t.0 as usize])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub allocation: Vec<TaskSet>,
    #[serde(with = "exact_vec")]
    pub payments: Vec<Rational>,
    #[serde(with = "exact_vec")]
    pub prices: Vec<Rational>,
    /// Passes run, including the final quiet one.
    pub rounds: usize,
    pub trace: Vec<TraceRow>,
}

impl AuctionOutcome {
    pub fn total_payment(&self) -> Rational {
        self.payments.iter().fold(Rational::zero(), |a, p| a + p)
    }

    /// Disjoint allocation, payment identity, ε-grid prices, and a trace in
    /// which every demand raised exactly the demanded prices by ε and every
    /// task ended with the last device that asked for it.
    pub fn check_invariants(&self, epsilon: &Rational) -> Result<()> {
        let bad = |m: String| Err(Error::Invariant(m));
        let tasks = self.prices.len();
        let mut seen = TaskSet::EMPTY;
        for (i, a) in self.allocation.iter().enumerate() {
            if !a.is_disjoint(seen) {
                return bad(format!("device {i} shares tasks with another device"));
            }
            seen = seen.union(*a);
            let expected = a
                .iter()
                .fold(Rational::zero(), |acc, t| acc + self.prices[t.0 as usize]);
            if self.payments[i] != expected {
                return bad(format!("device {i} paid {} instead of {expected}", self.payments[i]));
            }
        }
        for (j, p) in self.prices.iter().enumerate() {
            if *p < Rational::zero() || !(p / epsilon).is_integer() {
                return bad(format!("price {p} of task {j} is not a multiple of ε"));
            }
        }
        let mut prev = vec![Rational::zero(); tasks];
        let mut last_taker: Vec<Option<usize>> = vec![None; tasks];
        for row in &self.trace {
            for j in 0..tasks {
                let demanded = row.demanded.contains(TaskId(j as u8));
                let step = if demanded { *epsilon } else { Rational::zero() };
                if row.prices[j] != prev[j] + step {
                    return bad(format!("task {j} price moved by other than ε at pass {}", row.pass));
                }
                if demanded {
                    last_taker[j] = Some(row.device);
                }
            }
            prev.clone_from(&row.prices);
        }
        if prev != self.prices {
            return bad("final prices differ from the trace".into());
        }
        for (j, taker) in last_taker.iter().enumerate() {
            let holder = self.allocation.iter().position(|a| a.contains(TaskId(j as u8)));
            if *taker != holder {
                return bad(format!("task {j} held by {holder:?} but last taken by {taker:?}"));
            }
        }
        Ok(())
    }
}

/// Runs passes until one is quiet.
pub fn wipd_run(
    tasks: usize,
    devices: usize,
    oracle: &mut dyn DemandOracle,
    config: &WipdConfig,
) -> Result<AuctionOutcome> {
    if config.epsilon <= Rational::zero() {
        return Err(Error::config(format!(
            "epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    if tasks > MAX_TASKS {
        return Err(Error::config(format!(
            "at most {MAX_TASKS} tasks are supported, got {tasks}"
        )));
    }
    let max_rounds = config
        .max_rounds
        .unwrap_or_else(|| oracle.default_max_rounds(tasks, &config.epsilon));
    if max_rounds == 0 {
        return Err(Error::config("max_rounds must be at least 1"));
    }
    let full = TaskSet::full(tasks);
    let mut state = AuctionState::new(tasks, devices, config.epsilon);
    let mut trace = Vec::new();
    loop {
        state.pass += 1;
        if state.pass > max_rounds {
            return Err(Error::NonTermination { max_rounds, trace });
        }
        let mut quiet = true;
        for device in 0..devices {
            let ctx = DemandContext {
                pass: state.pass,
                device,
                tasks,
                holdings: state.holdings[device],
                prices: &state.prices,
                epsilon: &state.epsilon,
            };
            let f = oracle.demand(&ctx)?;
            if f.is_empty() {
                continue;
            }
            if !f.is_subset(full.difference(state.holdings[device])) {
                return Err(Error::domain(format!(
                    "device {device} demanded {f:?}, which overlaps its holding or exceeds {tasks} tasks"
                )));
            }
            quiet = false;
            state.take(device, f);
            trace.push(TraceRow {
                pass: state.pass,
                device,
                demanded: f,
                prices: state.prices.clone(),
            });
        }
        if quiet {
            break;
        }
    }
    let payments = state.holdings.iter().map(|h| state.bundle_price(*h)).collect();
    Ok(AuctionOutcome {
        allocation: state.holdings,
        payments,
        prices: state.prices,
        rounds: state.pass,
        trace,
    })
}

/// Payment minus valuation for an allocated device, else 0.
pub fn device_utility(payment: &Rational, valuation: &Rational, allocated: bool) -> Rational {
    if allocated {
        payment - valuation
    } else {
        Rational::zero()
    }
}

/// A device's objective for holding `set` at `prices` under `policy`.
pub fn policy_utility(v: &Valuation, set: TaskSet, prices: &[Rational], policy: DemandPolicy) -> Rational {
    let paid = set.iter().fold(Rational::zero(), |acc, t| acc + prices[t.0 as usize]);
    match policy {
        DemandPolicy::PaperLiteral => v.value(set) - paid,
        DemandPolicy::NetGain => paid - v.value(set),
    }
}

/// Bundles that would beat a device's final holding at final prices by more
/// than `(m + |T|)·ε` under the policy's objective. Empty when ε-stable.
pub fn stability_violations(
    table: &ValuationTable,
    outcome: &AuctionOutcome,
    epsilon: &Rational,
    policy: DemandPolicy,
) -> Vec<(usize, TaskSet, Rational)> {
    let m = table.tasks;
    let mut out = Vec::new();
    for (i, v) in table.devices.iter().enumerate() {
        let held = policy_utility(v, outcome.allocation[i], &outcome.prices, policy);
        for t in TaskSet::full(m).subsets() {
            let gap = policy_utility(v, t, &outcome.prices, policy) - held;
            let allowed = Rational::from_integer((m + t.len()) as i128) * epsilon;
            if gap > allowed {
                out.push((i, t, gap));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::int;

    #[test]
    fn single_device_single_pass() {
        let mut oracle = ScriptedOracle::new([(1, 0, TaskSet::of(&[0, 1]))]);
        let out = wipd_run(2, 1, &mut oracle, &WipdConfig::new(int(1))).unwrap();
        assert_eq!(out.allocation, vec![TaskSet::of(&[0, 1])]);
        assert_eq!(out.payments, vec![int(2)]);
        assert_eq!(out.rounds, 2);
        out.check_invariants(&int(1)).unwrap();
    }

    #[test]
    fn script_8x3_reaches_stated_partition() {
        let mut oracle = fixtures::script_8x3();
        let out = wipd_run(8, 3, &mut oracle, &WipdConfig::new(int(1))).unwrap();
        assert!(out.rounds <= 5);
        assert_eq!(
            out.allocation,
            vec![TaskSet::of(&[0, 1, 2]), TaskSet::of(&[3, 5, 7]), TaskSet::of(&[4, 6])]
        );
        let prices: Vec<i64> = vec![1, 1, 6, 3, 1, 3, 6, 3];
        assert_eq!(out.prices, prices.iter().map(|&p| int(p)).collect::<Vec<_>>());
        assert_eq!(out.payments, vec![int(8), int(9), int(7)]);
        out.check_invariants(&int(1)).unwrap();
    }

    #[test]
    fn utility_cases() {
        assert_eq!(device_utility(&int(8), &int(6), true), int(2));
        assert_eq!(device_utility(&int(7), &int(4), true), int(3));
        assert_eq!(device_utility(&int(7), &int(4), false), int(0));
    }

    #[test]
    fn off_script_demands_overlapping_holdings_are_rejected() {
        let mut oracle = ScriptedOracle::new([(1, 0, TaskSet::of(&[0])), (2, 0, TaskSet::of(&[0]))]);
        assert!(matches!(
            wipd_run(1, 1, &mut oracle, &WipdConfig::new(int(1))),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn seller_reading_cycles_until_the_guard() {
        // Once the price passes both costs, each device keeps taking the task
        // back because the raised price beats its cost.
        let table = ValuationTable::additive_integers(1, &[vec![1], vec![0]]).unwrap();
        let mut oracle = ValuationOracle::new(table, DemandPolicy::NetGain);
        let err = wipd_run(1, 2, &mut oracle, &WipdConfig::new(int(1))).unwrap_err();
        match err {
            Error::NonTermination { max_rounds, trace } => {
                assert_eq!(max_rounds, 2);
                assert!(!trace.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn literal_policy_settles_additive_instance() {
        let table = ValuationTable::additive_integers(2, &[vec![5, 1], vec![3, 4]]).unwrap();
        let eps = int(1);
        let mut oracle = ValuationOracle::new(table.clone(), DemandPolicy::PaperLiteral);
        let out = wipd_run(2, 2, &mut oracle, &WipdConfig::new(eps)).unwrap();
        out.check_invariants(&eps).unwrap();
        assert_eq!(out.allocation, vec![TaskSet::of(&[0]), TaskSet::of(&[1])]);
        assert!(stability_violations(&table, &out, &eps, DemandPolicy::PaperLiteral).is_empty());
    }

    #[test]
    fn rejects_bad_config() {
        let mut oracle = ScriptedOracle::default();
        assert!(matches!(
            wipd_run(2, 1, &mut oracle, &WipdConfig::new(int(0))),
            Err(Error::Config(_))
        ));
        let cfg = WipdConfig {
            epsilon: int(1),
            max_rounds: Some(0),
        };
        assert!(matches!(wipd_run(2, 1, &mut oracle, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn trace_csv_format() {
        let mut oracle = ScriptedOracle::new([(1, 0, TaskSet::of(&[1]))]);
        let out = wipd_run(2, 1, &mut oracle, &WipdConfig::new(rational::ratio(1, 2))).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "pass,device,demanded,prices\n1,0,1,0;1/2\n"
        );
    }
}
