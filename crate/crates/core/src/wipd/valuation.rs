use std::collections::BTreeMap;
use std::io::Read;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::tasks::{TaskSet, MAX_TASKS};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// A device's value for executing each bundle of tasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    /// Sum of per-task values; tasks past the end are worth 0.
    Additive(Vec<Rational>),
    /// Listed bundles; any other bundle is worth the best listed bundle it
    /// contains, or 0.
    Explicit(Vec<(TaskSet, Rational)>),
}

impl Valuation {
    pub fn additive_integers(values: &[i64]) -> Self {
        Valuation::Additive(values.iter().map(|&v| rational::int(v)).collect())
    }

    pub fn zero() -> Self {
        Valuation::Additive(Vec::new())
    }

    pub fn value(&self, set: TaskSet) -> Rational {
        match self {
            Valuation::Additive(vals) => set
                .iter()
                .filter_map(|t| vals.get(t.0 as usize))
                .fold(Rational::zero(), |acc, v| acc + v),
            Valuation::Explicit(bundles) => bundles
                .iter()
                .filter(|(b, _)| b.is_subset(set))
                .map(|(_, v)| *v)
                .max()
                .unwrap_or_else(Rational::zero),
        }
    }

    /// Every reported value multiplied by `factor`.
    pub fn scaled(&self, factor: &Rational) -> Self {
        match self {
            Valuation::Additive(vals) => Valuation::Additive(vals.iter().map(|v| v * factor).collect()),
            Valuation::Explicit(b) => Valuation::Explicit(b.iter().map(|(s, v)| (*s, v * factor)).collect()),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let negative = |v: &Rational| *v < Rational::zero();
        match self {
            Valuation::Additive(vals) => {
                if vals.len() > m {
                    return Err(Error::domain(format!("{} per-task values for {m} tasks", vals.len())));
                }
                if vals.iter().any(negative) {
                    return Err(Error::domain("valuations must be non-negative"));
                }
            }
            Valuation::Explicit(bundles) => {
                for (s, v) in bundles {
                    s.check_within(m)?;
                    if negative(v) {
                        return Err(Error::domain("valuations must be non-negative"));
                    }
                    if s.is_empty() && !v.is_zero() {
                        return Err(Error::domain("the empty bundle must be worth 0"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Valuations of every device over a common set of `tasks`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuationTable {
    pub tasks: usize,
    pub devices: Vec<Valuation>,
}

#[derive(Serialize, Deserialize)]
struct BundleJson {
    subset: TaskSet,
    #[serde(with = "rational::exact")]
    value: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeviceJson {
    Additive { additive: Vec<ExactJson> },
    Bundles(Vec<BundleJson>),
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct ExactJson(#[serde(with = "rational::exact")] Rational);

#[derive(Serialize, Deserialize)]
struct TableJson {
    tasks: usize,
    valuations: BTreeMap<usize, DeviceJson>,
}

impl ValuationTable {
    pub fn new(tasks: usize, devices: Vec<Valuation>) -> Result<Self> {
        if tasks > MAX_TASKS {
            return Err(Error::config(format!(
                "at most {MAX_TASKS} tasks are supported, got {tasks}"
            )));
        }
        for v in &devices {
            v.validate(tasks)?;
        }
        Ok(ValuationTable { tasks, devices })
    }

    pub fn additive_integers(tasks: usize, rows: &[Vec<i64>]) -> Result<Self> {
        Self::new(tasks, rows.iter().map(|r| Valuation::additive_integers(r)).collect())
    }

    /// Largest value any device puts on the full task set.
    pub fn max_value(&self) -> Rational {
        let full = TaskSet::full(self.tasks);
        self.devices
            .iter()
            .map(|v| v.value(full))
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Reads `{"tasks": m, "valuations": {"0": [{"subset": [..], "value": v}, ..],
    /// "1": {"additive": [..]}}}`. Device keys must be `0..n` without gaps.
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let raw: TableJson = serde_json::from_reader(reader)?;
        let n = raw.valuations.len();
        let mut devices = Vec::with_capacity(n);
        for (i, (key, dev)) in raw.valuations.into_iter().enumerate() {
            if key != i {
                return Err(Error::domain(format!("device keys must be 0..{n}, found {key}")));
            }
            devices.push(match dev {
                DeviceJson::Additive { additive } => Valuation::Additive(additive.into_iter().map(|e| e.0).collect()),
                DeviceJson::Bundles(b) => Valuation::Explicit(b.into_iter().map(|b| (b.subset, b.value)).collect()),
            });
        }
        Self::new(raw.tasks, devices)
    }

    pub fn to_json(&self) -> Result<String> {
        let valuations = self
            .devices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = match v {
                    Valuation::Additive(vals) => DeviceJson::Additive {
                        additive: vals.iter().map(|v| ExactJson(*v)).collect(),
                    },
                    Valuation::Explicit(b) => {
                        DeviceJson::Bundles(b.iter().map(|(s, v)| BundleJson { subset: *s, value: *v }).collect())
                    }
                };
                (i, d)
            })
            .collect();
        Ok(serde_json::to_string_pretty(&TableJson {
            tasks: self.tasks,
            valuations,
        })?)
    }
}
