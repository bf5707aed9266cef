//! Tier two, first stage: quality identification by peer review.
//!
//! Devices are ranked in batches of `f`. Each batch is placed at random on
//! `[0, 1]`, `g` reviewers drawn from outside the batch report one peak each,
//! and the panel device nearest the aggregate peak wins the batch. The median
//! aggregate is strategyproof for single-peaked reviewers; the mean (AVR) is
//! the manipulable baseline.

mod source;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

pub use source::{PeakDistribution, PeakRequest, PeakSource, SampledPeaks, ScriptedPeaks};

/// Distances closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

const PANEL_STREAM: u64 = 0;
const REVIEWER_STREAM: u64 = 1;
const POSITION_STREAM: u64 = 2;
pub(crate) const PEAK_STREAM: u64 = 3;

/// Generator for one purpose within one batch; independent of every other
/// batch and purpose.
pub(crate) fn batch_rng(seed: u64, batch: usize, purpose: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64 * 4 + purpose);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

impl Aggregation {
    pub fn apply(self, reports: &[f64]) -> Result<f64> {
        match self {
            Aggregation::Median => median_of(reports),
            Aggregation::Mean => mean_of(reports),
        }
    }
}

/// Devices of one batch and their positions on the unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedPanel {
    pub entries: Vec<(NodeId, f64)>,
}

impl PlacedPanel {
    pub fn new(entries: Vec<(NodeId, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("panel is empty"));
        }
        for (i, (d, p)) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::domain(format!("position {p} of device {d} outside [0, 1]")));
            }
            if entries[..i].iter().any(|(e, _)| e == d) {
                return Err(Error::domain(format!("device {d} placed twice")));
            }
        }
        Ok(PlacedPanel { entries })
    }

    pub fn devices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|(d, _)| *d)
    }

    pub fn position(&self, device: NodeId) -> Option<f64> {
        self.entries.iter().find(|(d, _)| *d == device).map(|(_, p)| *p)
    }

    pub fn contains(&self, device: NodeId) -> bool {
        self.position(device).is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub reviewer: NodeId,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    /// 1-based.
    pub batch: usize,
    pub panel: PlacedPanel,
    pub reports: Vec<PeakReport>,
    pub aggregate: f64,
    pub winner: NodeId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRanking {
    pub aggregation: Aggregation,
    /// One winner per batch, in batch order.
    pub ordered: Vec<NodeId>,
    pub batches: Vec<BatchRecord>,
}

impl QualityRanking {
    /// Partition and membership invariants against the ranked device set.
    pub fn check_invariants(&self, devices: &[NodeId]) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.batches {
            if !b.panel.contains(b.winner) {
                return Err(Error::Invariant(format!("batch {} winner outside its panel", b.batch)));
            }
            for d in b.panel.devices() {
                if !seen.insert(d) {
                    return Err(Error::Invariant(format!("device {d} ranked twice")));
                }
            }
            if b.reports.iter().any(|r| b.panel.contains(r.reviewer)) {
                return Err(Error::Invariant(format!(
                    "batch {} reviewed by a panel member",
                    b.batch
                )));
            }
        }
        let all: std::collections::BTreeSet<_> = devices.iter().copied().collect();
        if seen != all {
            return Err(Error::Invariant("batches do not partition the devices".into()));
        }
        if self.ordered.len() != self.batches.len() {
            return Err(Error::Invariant("one winner per batch expected".into()));
        }
        Ok(())
    }
}

/// One predetermined batch: the panel with its positions and the reviewers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBatch {
    pub panel: PlacedPanel,
    pub reviewers: Vec<NodeId>,
}

/// How panels, reviewers and positions are chosen.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum BatchPlan {
    /// Uniform draws from the run's seed.
    #[default]
    Random,
    /// Fixed batches, validated against the pool as they are used.
    Scripted(Vec<ScriptedBatch>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankingConfig {
    pub f: usize,
    pub g: usize,
    pub aggregation: Aggregation,
}

pub fn median_of(reports: &[f64]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::domain("median of no reports"));
    }
    let mut r = reports.to_vec();
    r.sort_by(f64::total_cmp);
    let n = r.len();
    Ok(if n % 2 == 1 {
        r[n / 2]
    } else {
        (r[n / 2 - 1] + r[n / 2]) / 2.0
    })
}

pub fn mean_of(reports: &[f64]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::domain("mean of no reports"));
    }
    Ok(reports.iter().sum::<f64>() / reports.len() as f64)
}

/// Panel device nearest to `aggregate`; near-ties go to the lowest id.
pub fn select_quality(panel: &PlacedPanel, aggregate: f64) -> NodeId {
    let mut best: Option<(f64, NodeId)> = None;
    for &(d, p) in &panel.entries {
        let dist = (p - aggregate).abs();
        best = match best {
            Some((bd, bn)) if dist > bd + TIE_TOLERANCE => Some((bd, bn)),
            Some((bd, bn)) if dist >= bd - TIE_TOLERANCE => Some((bd.min(dist), bn.min(d))),
            _ => Some((dist, d)),
        };
    }
    best.expect("panel is non-empty").1
}

/// Distance between a reviewer's true peak and the aggregate.
pub fn reviewer_regret(true_alpha: f64, aggregate: f64) -> f64 {
    (true_alpha - aggregate).abs()
}

fn check_distinct(devices: &[NodeId]) -> Result<()> {
    let mut sorted = devices.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::domain(format!("device {} listed twice", w[0])));
    }
    Ok(())
}

fn draw_batch(
    seed: u64,
    batch: usize,
    unranked: &[NodeId],
    all: &[NodeId],
    cfg: &RankingConfig,
) -> (PlacedPanel, Vec<NodeId>) {
    let take = cfg.f.min(unranked.len());
    let mut rng = batch_rng(seed, batch, PANEL_STREAM);
    let mut eta: Vec<NodeId> = index::sample(&mut rng, unranked.len(), take)
        .into_iter()
        .map(|i| unranked[i])
        .collect();
    eta.sort();

    let pool: Vec<NodeId> = all.iter().copied().filter(|d| !eta.contains(d)).collect();
    let mut rng = batch_rng(seed, batch, REVIEWER_STREAM);
    let mut reviewers: Vec<NodeId> = index::sample(&mut rng, pool.len(), cfg.g)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    reviewers.sort();

    let mut rng = batch_rng(seed, batch, POSITION_STREAM);
    let entries = eta.into_iter().map(|d| (d, rng.random::<f64>())).collect();
    (PlacedPanel { entries }, reviewers)
}

fn check_scripted(batch: usize, sb: &ScriptedBatch, unranked: &[NodeId], all: &[NodeId]) -> Result<()> {
    let bad = |m: String| Error::config(format!("scripted batch {batch}: {m}"));
    for d in sb.panel.devices() {
        if !unranked.contains(&d) {
            return Err(bad(format!("device {d} is not awaiting ranking")));
        }
    }
    check_distinct(&sb.reviewers)?;
    if sb.reviewers.is_empty() {
        return Err(bad("no reviewers".into()));
    }
    for r in &sb.reviewers {
        if !all.contains(r) || sb.panel.contains(*r) {
            return Err(bad(format!("reviewer {r} is not eligible")));
        }
    }
    Ok(())
}

/// Ranks `devices` batch by batch until every device has been placed once.
pub fn rank_devices(
    devices: &[NodeId],
    cfg: &RankingConfig,
    plan: &BatchPlan,
    peaks: &mut dyn PeakSource,
    seed: u64,
) -> Result<QualityRanking> {
    if cfg.f == 0 || cfg.g == 0 {
        return Err(Error::config("f and g must be at least 1"));
    }
    if cfg.f + cfg.g > devices.len() {
        return Err(Error::config(format!(
            "f + g = {} exceeds the {} devices available",
            cfg.f + cfg.g,
            devices.len()
        )));
    }
    check_distinct(devices)?;
    let mut all = devices.to_vec();
    all.sort();
    let mut unranked = all.clone();
    let mut ranking = QualityRanking {
        aggregation: cfg.aggregation,
        ordered: Vec::new(),
        batches: Vec::new(),
    };
    while !unranked.is_empty() {
        let batch = ranking.batches.len() + 1;
        let (panel, reviewers) = match plan {
            BatchPlan::Random => draw_batch(seed, batch, &unranked, &all, cfg),
            BatchPlan::Scripted(list) => {
                let sb = list
                    .get(batch - 1)
                    .ok_or_else(|| Error::config(format!("script ends before batch {batch}")))?;
                check_scripted(batch, sb, &unranked, &all)?;
                (sb.panel.clone(), sb.reviewers.clone())
            }
        };
        let mut rng = batch_rng(seed, batch, PEAK_STREAM);
        let mut reports = Vec::with_capacity(reviewers.len());
        for &reviewer in &reviewers {
            let alpha = peaks.report(
                &PeakRequest {
                    batch,
                    reviewer,
                    panel: &panel,
                },
                &mut rng,
            )?;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::domain(format!(
                    "peak {alpha} of reviewer {reviewer} outside [0, 1]"
                )));
            }
            reports.push(PeakReport { reviewer, alpha });
        }
        let alphas: Vec<f64> = reports.iter().map(|r| r.alpha).collect();
        let aggregate = cfg.aggregation.apply(&alphas)?;
        let winner = select_quality(&panel, aggregate);
        unranked.retain(|d| !panel.contains(*d));
        ranking.ordered.push(winner);
        ranking.batches.push(BatchRecord {
            batch,
            panel,
            reports,
            aggregate,
            winner,
        });
    }
    Ok(ranking)
}

/// Median-aggregated ranking.
pub fn ectai_run(
    devices: &[NodeId],
    f: usize,
    g: usize,
    plan: &BatchPlan,
    peaks: &mut dyn PeakSource,
    seed: u64,
) -> Result<QualityRanking> {
    let cfg = RankingConfig {
        f,
        g,
        aggregation: Aggregation::Median,
    };
    rank_devices(devices, &cfg, plan, peaks, seed)
}

/// Mean-aggregated ranking.
pub fn avr_run(
    devices: &[NodeId],
    f: usize,
    g: usize,
    plan: &BatchPlan,
    peaks: &mut dyn PeakSource,
    seed: u64,
) -> Result<QualityRanking> {
    let cfg = RankingConfig {
        f,
        g,
        aggregation: Aggregation::Mean,
    };
    rank_devices(devices, &cfg, plan, peaks, seed)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::fixtures;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn median_cases() {
        assert_eq!(median_of(&[0.7]).unwrap(), 0.7);
        assert!((median_of(&[0.2, 0.4]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(median_of(&[0.9, 0.1, 0.5, 0.65, 0.2]).unwrap(), 0.5);
        assert!(median_of(&[]).is_err());
    }

    #[test]
    fn mean_diverges_from_median() {
        let r = [0.0, 0.0, 1.0];
        assert!((mean_of(&r).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(median_of(&r).unwrap(), 0.0);
    }

    #[test]
    fn nearest_device() {
        let p = PlacedPanel::new(vec![
            (NodeId(0), 0.34),
            (NodeId(1), 0.47),
            (NodeId(2), 0.52),
            (NodeId(3), 0.65),
        ])
        .unwrap();
        assert_eq!(select_quality(&p, 0.50), NodeId(2));
        assert_eq!(select_quality(&p, 0.65), NodeId(3));
        let p = PlacedPanel::new(vec![(NodeId(8), 0.6), (NodeId(5), 0.4)]).unwrap();
        assert_eq!(select_quality(&p, 0.5), NodeId(5));
    }

    #[test]
    fn regret() {
        assert_eq!(reviewer_regret(0.5, 0.5), 0.0);
        assert!((reviewer_regret(0.2, 0.5) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn panel_validation() {
        assert!(PlacedPanel::new(vec![]).is_err());
        assert!(PlacedPanel::new(vec![(NodeId(0), 1.5)]).is_err());
        assert!(PlacedPanel::new(vec![(NodeId(0), 0.1), (NodeId(0), 0.2)]).is_err());
    }

    #[test]
    fn example_two_replay() {
        let (devices, plan, mut peaks) = fixtures::example2();
        let r = ectai_run(&devices, 3, 5, &plan, &mut peaks, 0).unwrap();
        assert_eq!(r.ordered, ids(&[4, 3, 10, 8]));
        let medians: Vec<f64> = r.batches.iter().map(|b| b.aggregate).collect();
        assert_eq!(medians, vec![0.50, 0.50, 0.45, 0.35]);
        r.check_invariants(&devices).unwrap();
    }

    #[test]
    fn random_run_partitions_and_is_reproducible() {
        let devices = ids(&(0..23).collect::<Vec<_>>());
        let run = |seed| {
            let mut peaks = SampledPeaks::new(PeakDistribution::Uniform);
            ectai_run(&devices, 4, 5, &BatchPlan::Random, &mut peaks, seed).unwrap()
        };
        let a = run(9);
        a.check_invariants(&devices).unwrap();
        assert_eq!(a.batches.len(), 6);
        assert_eq!(a.batches.last().unwrap().panel.entries.len(), 3);
        assert_eq!(a, run(9));
        assert_ne!(a, run(10));
    }

    #[test]
    fn pool_of_exactly_f_has_no_reviewers() {
        let mut peaks = SampledPeaks::new(PeakDistribution::Uniform);
        assert!(matches!(
            ectai_run(&ids(&[0, 1, 2]), 3, 1, &BatchPlan::Random, &mut peaks, 1),
            Err(Error::Config(_))
        ));
        // the smallest feasible pool ranks f devices, then the g former reviewers
        let r = ectai_run(&ids(&[0, 1, 2, 3, 4]), 3, 2, &BatchPlan::Random, &mut peaks, 1).unwrap();
        assert_eq!(r.batches.len(), 2);
        assert_eq!(r.batches[1].panel.entries.len(), 2);
    }

    #[test]
    fn oversized_batches_rejected() {
        let mut peaks = SampledPeaks::new(PeakDistribution::Uniform);
        assert!(matches!(
            ectai_run(&ids(&[0, 1, 2]), 2, 2, &BatchPlan::Random, &mut peaks, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ectai_run(&ids(&[0, 1, 2]), 0, 2, &BatchPlan::Random, &mut peaks, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mean_winner_matches_one_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let devices = ids(&(0..40).collect::<Vec<_>>());
        let mut checked = 0;
        while checked < 100 {
            let mut peaks = SampledPeaks::new(PeakDistribution::Uniform);
            let seed = rng.random();
            let r = avr_run(&devices, 3, 4, &BatchPlan::Random, &mut peaks, seed).unwrap();
            for b in &r.batches {
                let mean = b.reports.iter().map(|r| r.alpha).sum::<f64>() / b.reports.len() as f64;
                let oracle = b
                    .panel
                    .entries
                    .iter()
                    .min_by(|x, y| (x.1 - mean).abs().total_cmp(&(y.1 - mean).abs()).then(x.0.cmp(&y.0)))
                    .unwrap()
                    .0;
                assert_eq!(b.winner, oracle);
                checked += 1;
            }
        }
    }

    #[test]
    fn equal_reports_give_same_winner_under_both_rules() {
        let devices = ids(&(0..12).collect::<Vec<_>>());
        let mut peaks = ScriptedPeaks::constant(0.37);
        let a = ectai_run(&devices, 3, 4, &BatchPlan::Random, &mut peaks, 2).unwrap();
        let b = avr_run(&devices, 3, 4, &BatchPlan::Random, &mut peaks, 2).unwrap();
        assert_eq!(a.ordered, b.ordered);
    }
}
