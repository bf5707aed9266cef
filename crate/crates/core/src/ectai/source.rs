use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PlacedPanel;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// What a reviewer is asked to report on.
#[derive(Clone, Copy, Debug)]
pub struct PeakRequest<'a> {
    /// 1-based batch number.
    pub batch: usize,
    pub reviewer: NodeId,
    pub panel: &'a PlacedPanel,
}

/// Provider of reviewer peaks. `rng` is the batch's dedicated peak stream;
/// requests arrive in ascending reviewer order.
pub trait PeakSource {
    fn report(&mut self, req: &PeakRequest<'_>, rng: &mut ChaCha8Rng) -> Result<f64>;
}

/// Replays fixed peaks keyed by `(batch, reviewer)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScriptedPeaks {
    entries: BTreeMap<(usize, NodeId), f64>,
    fallback: Option<f64>,
}

impl ScriptedPeaks {
    pub fn new(entries: impl IntoIterator<Item = (usize, NodeId, f64)>) -> Self {
        ScriptedPeaks {
            entries: entries.into_iter().map(|(b, r, a)| ((b, r), a)).collect(),
            fallback: None,
        }
    }

    /// Every reviewer reports `alpha`.
    pub fn constant(alpha: f64) -> Self {
        ScriptedPeaks {
            entries: BTreeMap::new(),
            fallback: Some(alpha),
        }
    }

    /// Reads `batch,reviewer,alpha` rows; a header row is allowed.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err("expected batch,reviewer,alpha".into()));
            }
            let Ok(batch) = fields[0].parse::<usize>() else {
                if idx == 0 {
                    continue;
                }
                return Err(err(format!("invalid batch {:?}", fields[0])));
            };
            let reviewer: u32 = fields[1]
                .parse()
                .map_err(|_| err(format!("invalid reviewer {:?}", fields[1])))?;
            let alpha: f64 = fields[2]
                .parse()
                .map_err(|_| err(format!("invalid alpha {:?}", fields[2])))?;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(err(format!("alpha {alpha} outside [0, 1]")));
            }
            entries.insert((batch, NodeId(reviewer)), alpha);
        }
        Ok(ScriptedPeaks {
            entries,
            fallback: None,
        })
    }
}

impl PeakSource for ScriptedPeaks {
    fn report(&mut self, req: &PeakRequest<'_>, _rng: &mut ChaCha8Rng) -> Result<f64> {
        self.entries
            .get(&(req.batch, req.reviewer))
            .copied()
            .or(self.fallback)
            .ok_or_else(|| {
                Error::domain(format!(
                    "no scripted peak for reviewer {} in batch {}",
                    req.reviewer, req.batch
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PeakDistribution {
    Uniform,
    /// Samples outside `[0, 1]` are clamped, so each report costs one draw.
    Normal {
        mu: f64,
        sigma: f64,
    },
}

impl PeakDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PeakDistribution::Uniform => Ok(()),
            PeakDistribution::Normal { mu, sigma } => {
                if mu.is_finite() && sigma.is_finite() && sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "invalid normal parameters mu={mu}, sigma={sigma}"
                    )))
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            PeakDistribution::Uniform => rng.random::<f64>(),
            PeakDistribution::Normal { mu, sigma } => {
                let n = Normal::new(mu, sigma).expect("validated parameters");
                n.sample(rng).clamp(0.0, 1.0)
            }
        }
    }
}

/// Independent peaks drawn from a distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledPeaks {
    pub distribution: PeakDistribution,
}

impl SampledPeaks {
    pub fn new(distribution: PeakDistribution) -> Self {
        SampledPeaks { distribution }
    }
}

impl PeakSource for SampledPeaks {
    fn report(&mut self, _req: &PeakRequest<'_>, rng: &mut ChaCha8Rng) -> Result<f64> {
        self.distribution.validate()?;
        Ok(self.distribution.sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn csv_round_trip() {
        let csv = "batch,reviewer,alpha\n1,3,0.5\n1,7,0.25\n";
        let mut s = ScriptedPeaks::from_csv(csv.as_bytes()).unwrap();
        let panel = PlacedPanel::new(vec![(NodeId(1), 0.2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let req = PeakRequest {
            batch: 1,
            reviewer: NodeId(7),
            panel: &panel,
        };
        assert_eq!(s.report(&req, &mut rng).unwrap(), 0.25);
        let req = PeakRequest {
            batch: 2,
            reviewer: NodeId(7),
            panel: &panel,
        };
        assert!(s.report(&req, &mut rng).is_err());
        assert!(ScriptedPeaks::from_csv("1,2,1.5\n".as_bytes()).is_err());
        assert!(matches!(
            ScriptedPeaks::from_csv("1,2\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn normal_samples_are_clamped() {
        let d = PeakDistribution::Normal { mu: 0.6, sigma: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..5000).map(|_| d.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(xs.contains(&1.0));
        assert!(PeakDistribution::Normal { mu: 0.5, sigma: -1.0 }.validate().is_err());
    }
}
