use rayon::prelude::*;
use serde::Serialize;

use super::tasks::TaskSet;
use super::valuation::Valuation;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Exhaustive checks enumerate every subset of at most this many tasks.
pub const GS_TASK_CAP: usize = 6;

/// A price rise that destroys demand for a task whose price stayed fixed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GsWitness {
    /// Prices before the rise.
    pub before: Vec<u32>,
    /// Prices after the rise (`after ≥ before` componentwise).
    pub after: Vec<u32>,
    /// A bundle demanded at `before` whose unchanged-price part is in no
    /// bundle demanded at `after`.
    pub bundle: TaskSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GsReport {
    pub gross_substitutes: bool,
    pub witness: Option<GsWitness>,
}

fn decode(mut idx: usize, m: usize, base: usize) -> Vec<u32> {
    let mut p = vec![0u32; m];
    for slot in p.iter_mut() {
        *slot = (idx % base) as u32;
        idx /= base;
    }
    p
}

/// Every utility-maximising bundle at `prices`, as a bitmask over subset
/// indices.
fn demand_mask(values: &[Rational], prices: &[u32]) -> u64 {
    let mut best: Option<Rational> = None;
    let mut mask = 0u64;
    for (s, v) in values.iter().enumerate() {
        let paid: u32 = TaskSet::from_bits(s as u32).iter().map(|t| prices[t.0 as usize]).sum();
        let u = v - Rational::from_integer(paid as i128);
        match best {
            Some(b) if u < b => {}
            Some(b) if u == b => mask |= 1 << s,
            _ => {
                best = Some(u);
                mask = 1 << s;
            }
        }
    }
    mask
}

/// Checks gross substitutes on the integer price grid `{0..=grid_max}^m`:
/// for every `before ≤ after` and every bundle `S` demanded at `before`, some
/// bundle demanded at `after` must contain the tasks of `S` whose price did
/// not change. Demand is `argmax v(S) − Σ_S ρ` with all ties kept.
pub fn gs_check(v: &Valuation, tasks: usize, grid_max: u32) -> Result<GsReport> {
    if tasks > GS_TASK_CAP {
        return Err(Error::config(format!(
            "gross-substitutes check supports at most {GS_TASK_CAP} tasks, got {tasks}"
        )));
    }
    v.validate(tasks)?;
    let values: Vec<Rational> = (0..1u32 << tasks).map(|s| v.value(TaskSet::from_bits(s))).collect();
    let base = grid_max as usize + 1;
    let count = base.pow(tasks as u32);
    let demand: Vec<u64> = (0..count)
        .into_par_iter()
        .map(|i| demand_mask(&values, &decode(i, tasks, base)))
        .collect();

    let witness = (0..count).into_par_iter().find_map_first(|i| {
        let before = decode(i, tasks, base);
        let mut after = before.clone();
        loop {
            let j = after
                .iter()
                .enumerate()
                .fold(0, |acc, (k, &p)| acc + p as usize * base.pow(k as u32));
            let unchanged = before
                .iter()
                .zip(&after)
                .enumerate()
                .filter(|(_, (a, b))| a == b)
                .fold(0u32, |m, (k, _)| m | 1 << k);
            for s in 0..1u32 << tasks {
                if demand[i] & (1 << s) == 0 {
                    continue;
                }
                let keep = s & unchanged;
                let kept = (0..1u32 << tasks).any(|t| demand[j] & (1 << t) != 0 && keep & !t == 0);
                if !kept {
                    return Some(GsWitness {
                        before: before.clone(),
                        after,
                        bundle: TaskSet::from_bits(s),
                    });
                }
            }
            // next `after ≥ before` in mixed radix
            let mut k = 0;
            loop {
                if k == tasks {
                    return None;
                }
                if after[k] < grid_max {
                    after[k] += 1;
                    break;
                }
                after[k] = before[k];
                k += 1;
            }
        }
    });
    Ok(GsReport {
        gross_substitutes: witness.is_none(),
        witness,
    })
}
