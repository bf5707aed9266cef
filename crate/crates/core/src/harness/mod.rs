//! Seeded experiments over every mechanism: instance generation, deviation
//! injection, utilities against true values, and report export.

pub mod instances;
pub mod report;
pub mod witness;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ectai::{self, BatchPlan, PeakDistribution, PeakRequest, PeakSource, RankingConfig, SampledPeaks};
use crate::error::{Error, Result};
use crate::graph::{self, NodeId, SocialGraph};
use crate::rational::{self, Rational};
use crate::tenm::{Budget, CostProfile, DeltaScope, NotifierOutcome, TenmConfig};
use crate::wipd::{self, DemandPolicy, GreedyBid, TaskSet, ValuationOracle, ValuationTable, WipdConfig};
use instances::{pick_deviators, random_additive_table, ValueDistribution};
pub use report::{
    digest_hex, graph_digest, DeviationWitness, MechanismReport, Metric, RoundRecord, REPORT_SCHEMA_VERSION,
};
use witness::Tier1Mechanism;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Tenm,
    Ntbfm,
    Psm,
    Ectai,
    Avr,
    Wipd,
    Greedy,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Tenm => "tenm",
            Mechanism::Ntbfm => "ntbfm",
            Mechanism::Psm => "psm",
            Mechanism::Ectai => "ectai",
            Mechanism::Avr => "avr",
            Mechanism::Wipd => "wipd",
            Mechanism::Greedy => "greedy",
        }
    }

    pub fn is_tier1(self) -> bool {
        matches!(self, Mechanism::Tenm | Mechanism::Ntbfm | Mechanism::Psm)
    }
}

/// Where the social graph comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GraphSource {
    /// Whitespace-separated edge list.
    File { path: PathBuf },
    /// `G(n, p)` drawn from the experiment seed.
    Random { nodes: usize, edge_prob: f64 },
    /// `G(n, m)` with exactly `edges` edges, drawn from the experiment seed.
    RandomEdges { nodes: usize, edges: usize },
}

impl GraphSource {
    pub fn load(&self, seed: u64) -> Result<SocialGraph> {
        match self {
            GraphSource::File { path } => {
                let f = File::open(path)
                    .map_err(|e| Error::config(format!("cannot read graph {}: {e}", path.display())))?;
                graph::load_edge_list(BufReader::new(f))
            }
            GraphSource::Random { nodes, edge_prob } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(GRAPH_STREAM);
                instances::random_graph(*nodes, *edge_prob, &mut rng)
            }
            GraphSource::RandomEdges { nodes, edges } => instances::random_graph_with_edges(*nodes, *edges, seed),
        }
    }
}

/// Which way tier-one deviators move their reported cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostDirection {
    /// `max(c − δ, floor)`.
    #[default]
    Lower,
    /// `c + δ`.
    Raise,
}

/// Constants of the misreporting rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRule {
    /// Share of devices that misreport; `⌈fraction·n⌉` are picked per round.
    pub fraction: f64,
    /// Tier-one deviators report `max(c − cost_delta, cost_floor)`, or
    /// `c + cost_delta` when raising.
    #[serde(with = "rational::exact")]
    pub cost_delta: Rational,
    pub cost_direction: CostDirection,
    #[serde(with = "rational::exact")]
    pub cost_floor: Rational,
    /// WiPD and GREEDY deviators multiply their valuations by this.
    #[serde(with = "rational::exact")]
    pub inflation: Rational,
}

impl Default for DeviationRule {
    fn default() -> Self {
        DeviationRule {
            fraction: 0.0,
            cost_delta: rational::int(5),
            cost_direction: CostDirection::Lower,
            cost_floor: rational::int(1),
            inflation: instances::default_inflation(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mechanism: Mechanism,
    pub graph: GraphSource,
    pub seed: u64,
    pub rounds: usize,
    /// Tier-one integer costs, uniform on `lo..=hi`.
    pub cost_range: (i64, i64),
    /// One entry per budget in a sweep.
    #[serde(with = "report::exact_vec")]
    pub budgets: Vec<Rational>,
    #[serde(with = "rational::exact")]
    pub delta: Rational,
    pub delta_scope: DeltaScope,
    pub deviation: DeviationRule,
    pub peaks: PeakDistribution,
    pub f: usize,
    pub g: usize,
    pub tasks: usize,
    pub values: ValueDistribution,
    #[serde(with = "rational::exact")]
    pub epsilon: Rational,
    pub policy: DemandPolicy,
    /// Adds wall-clock milliseconds per round; makes the report
    /// non-reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    /// Defaults from the simulation tables: costs in `[20, 50]`, peaks
    /// `N(0.6, 0.3)`, valuations in `[30, 45]` around `N(37, 8)`, 5 rounds.
    pub fn new(mechanism: Mechanism, graph: GraphSource) -> Self {
        ExperimentConfig {
            mechanism,
            graph,
            seed: 0,
            rounds: 5,
            cost_range: (20, 50),
            budgets: vec![rational::int(15000)],
            delta: rational::int(1),
            delta_scope: DeltaScope::Both,
            deviation: DeviationRule::default(),
            peaks: PeakDistribution::Normal { mu: 0.6, sigma: 0.3 },
            f: 3,
            g: 5,
            tasks: 4,
            values: ValueDistribution::Normal {
                mu: 37.0,
                sigma: 8.0,
                lo: 30,
                hi: 45,
            },
            epsilon: rational::int(1),
            policy: DemandPolicy::PaperLiteral,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.cost_range;
        if lo < 1 || lo > hi {
            return Err(Error::config(format!("cost range {lo}:{hi} must satisfy 1 ≤ lo ≤ hi")));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.deviation.fraction) {
            return Err(Error::config(format!(
                "deviation fraction {} outside [0, 1]",
                self.deviation.fraction
            )));
        }
        if self.deviation.cost_delta < Rational::zero() || self.deviation.cost_floor <= Rational::zero() {
            return Err(Error::config("cost deviation needs δ ≥ 0 and a positive floor"));
        }
        if self.deviation.inflation <= Rational::zero() {
            return Err(Error::config("inflation factor must be positive"));
        }
        if self.mechanism.is_tier1() {
            if self.budgets.is_empty() {
                return Err(Error::config("at least one budget is required"));
            }
            for b in &self.budgets {
                Budget::new(*b).map_err(|_| Error::config(format!("budget {b} must be positive")))?;
            }
            if self.delta <= Rational::zero() {
                return Err(Error::config("delta must be positive"));
            }
        }
        if matches!(self.mechanism, Mechanism::Ectai | Mechanism::Avr) {
            if self.f == 0 || self.g == 0 {
                return Err(Error::config("f and g must be at least 1"));
            }
            self.peaks.validate()?;
        }
        if matches!(self.mechanism, Mechanism::Wipd | Mechanism::Greedy) {
            if self.tasks == 0 || self.tasks > wipd::DEMAND_TASK_CAP {
                return Err(Error::config(format!(
                    "tasks must be in 1..={}, got {}",
                    wipd::DEMAND_TASK_CAP,
                    self.tasks
                )));
            }
            if self.epsilon <= Rational::zero() {
                return Err(Error::config("epsilon must be positive"));
            }
            self.values.validate()?;
        }
        Ok(())
    }

    fn tier1(&self) -> Tier1Mechanism {
        match self.mechanism {
            Mechanism::Ntbfm => Tier1Mechanism::Ntbfm,
            Mechanism::Psm => Tier1Mechanism::Psm,
            _ => Tier1Mechanism::Tenm(TenmConfig {
                delta: self.delta,
                delta_scope: self.delta_scope,
            }),
        }
    }
}

/// Stream reserved for drawing a random graph; rounds use their own number.
const GRAPH_STREAM: u64 = 0;

fn round_rng(seed: u64, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64);
    rng
}

/// Runs every round (concurrently when workers allow) and assembles the
/// report in round order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MechanismReport> {
    config.validate()?;
    let graph = config.graph.load(config.seed)?;
    run_experiment_on(config, &graph)
}

/// As [`run_experiment`] with the graph already loaded.
pub fn run_experiment_on(config: &ExperimentConfig, graph: &SocialGraph) -> Result<MechanismReport> {
    config.validate()?;
    let per_round: Vec<Vec<(RoundRecord, Option<DeviationWitness>)>> = (1..=config.rounds)
        .into_par_iter()
        .map(|round| run_round(config, graph, round))
        .collect::<Result<_>>()?;
    let mut rounds = Vec::new();
    let mut witnesses = Vec::new();
    for (rec, w) in per_round.into_iter().flatten() {
        rounds.push(rec);
        witnesses.extend(w);
    }
    let budget_feasible = config.mechanism.is_tier1().then(|| {
        rounds
            .iter()
            .all(|r| r.metrics.get("budget_feasible") == Some(&Metric::Flag(true)))
    });
    let config_json = serde_json::to_vec(config)?;
    Ok(MechanismReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mechanism: config.mechanism,
        config_digest: digest_hex(&[&config_json, graph_digest(graph).as_bytes()]),
        seed: config.seed,
        graph_nodes: graph.node_count(),
        graph_edges: graph.edge_count(),
        config: config.clone(),
        rounds,
        budget_feasible,
        witnesses,
    })
}

fn run_round(
    config: &ExperimentConfig,
    graph: &SocialGraph,
    round: usize,
) -> Result<Vec<(RoundRecord, Option<DeviationWitness>)>> {
    let mut rng = round_rng(config.seed, round);
    match config.mechanism {
        Mechanism::Tenm | Mechanism::Ntbfm | Mechanism::Psm => tier1_round(config, graph, round, &mut rng),
        Mechanism::Ectai | Mechanism::Avr => Ok(vec![ranking_round(config, graph, round, &mut rng)?]),
        Mechanism::Wipd | Mechanism::Greedy => Ok(vec![auction_round(config, graph, round, &mut rng)?]),
    }
}

fn timed<T>(on: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, Option<f64>)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, on.then(|| start.elapsed().as_secs_f64() * 1000.0)))
}

fn witness_if_gain(
    round: usize,
    budget: Option<Rational>,
    deviators: usize,
    deviating: Rational,
    truthful: Rational,
) -> Option<DeviationWitness> {
    (deviators > 0 && deviating > truthful).then_some(DeviationWitness {
        round,
        budget,
        deviators,
        deviating_utility: Metric::Exact(deviating),
        truthful_utility: Metric::Exact(truthful),
    })
}

fn tier1_round(
    config: &ExperimentConfig,
    graph: &SocialGraph,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(RoundRecord, Option<DeviationWitness>)>> {
    let n = graph.node_count();
    let (lo, hi) = config.cost_range;
    let truth = CostProfile::uniform_integers(n, lo, hi, rng)?;
    let deviators = pick_deviators(n, config.deviation.fraction, rng)?;
    let mut reported = truth.clone();
    for &d in &deviators {
        let node = NodeId(d as u32);
        let c = truth.get(node).expect("every node has a cost");
        let r = &config.deviation;
        let shifted = match r.cost_direction {
            CostDirection::Lower => instances::lower_cost(c, &r.cost_delta, &r.cost_floor),
            CostDirection::Raise => c + r.cost_delta,
        };
        reported = reported.with_report(node, shifted)?;
    }
    let mech = config.tier1();
    let utility = |out: &NotifierOutcome, nodes: &mut dyn Iterator<Item = NodeId>| {
        nodes.fold(Rational::zero(), |acc, v| {
            let c = truth.get(v).expect("every node has a cost");
            acc + crate::tenm::notifier_utility(c, &out.payment(v), out.is_selected(v))
        })
    };
    let mut records = Vec::with_capacity(config.budgets.len());
    for b in &config.budgets {
        let budget = Budget::new(*b)?;
        let (out, elapsed) = timed(config.timing, || mech.run(graph, &reported, &budget))?;
        out.check_invariants(&reported, &budget)?;
        let truthful = if deviators.is_empty() {
            out.clone()
        } else {
            let t = mech.run(graph, &truth, &budget)?;
            t.check_invariants(&truth, &budget)?;
            t
        };
        let dev_nodes = || deviators.iter().map(|&d| NodeId(d as u32));
        let deviating_u = utility(&out, &mut dev_nodes());
        let truthful_u = utility(&truthful, &mut dev_nodes());
        let total = out.total_payment();
        let mut metrics = BTreeMap::new();
        metrics.insert("total_utility".into(), Metric::Exact(utility(&out, &mut graph.nodes())));
        metrics.insert("total_payment".into(), Metric::Exact(total));
        metrics.insert("winners".into(), Metric::Count(out.selected.len() as u64));
        metrics.insert("notified".into(), Metric::Count(out.notified.len() as u64));
        metrics.insert("deviators".into(), Metric::Count(deviators.len() as u64));
        metrics.insert("deviator_utility".into(), Metric::Exact(deviating_u));
        metrics.insert("deviator_truthful_utility".into(), Metric::Exact(truthful_u));
        metrics.insert("budget_feasible".into(), Metric::Flag(&total <= budget.amount()));
        if let Some(ms) = elapsed {
            metrics.insert("elapsed_ms".into(), Metric::Real(ms));
        }
        let rec = RoundRecord {
            round,
            budget: Some(*b),
            metrics,
            winners: out.selected.iter().map(|v| graph.original_id(*v)).collect(),
            payments: out.payments.iter().map(|(v, p)| (graph.original_id(*v), *p)).collect(),
        };
        let w = witness_if_gain(round, Some(*b), deviators.len(), deviating_u, truthful_u);
        records.push((rec, w));
    }
    Ok(records)
}

/// Samples true peaks and lets chosen reviewers report the position of the
/// panel device nearest their true peak. Every report costs the same draws
/// as a truthful one, so deviation never shifts later samples.
struct DeviatingPeaks<'a> {
    base: SampledPeaks,
    deviators: &'a BTreeSet<NodeId>,
    /// `(reviewer, true peak)` per report in request order.
    truths: Vec<(NodeId, f64)>,
}

impl PeakSource for DeviatingPeaks<'_> {
    fn report(&mut self, req: &PeakRequest<'_>, rng: &mut ChaCha8Rng) -> Result<f64> {
        let alpha = self.base.report(req, rng)?;
        self.truths.push((req.reviewer, alpha));
        if self.deviators.contains(&req.reviewer) {
            let fav = ectai::select_quality(req.panel, alpha);
            return Ok(req.panel.position(fav).expect("favourite is on the panel"));
        }
        Ok(alpha)
    }
}

fn ranking_round(
    config: &ExperimentConfig,
    graph: &SocialGraph,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RoundRecord, Option<DeviationWitness>)> {
    let devices: Vec<NodeId> = graph.nodes().collect();
    let deviators: BTreeSet<NodeId> = pick_deviators(devices.len(), config.deviation.fraction, rng)?
        .into_iter()
        .map(|d| NodeId(d as u32))
        .collect();
    let ranking_seed: u64 = rng.random();
    let cfg = RankingConfig {
        f: config.f,
        g: config.g,
        aggregation: if config.mechanism == Mechanism::Avr {
            ectai::Aggregation::Mean
        } else {
            ectai::Aggregation::Median
        },
    };
    let empty = BTreeSet::new();
    let run = |who: &BTreeSet<NodeId>| -> Result<(ectai::QualityRanking, Vec<(NodeId, f64)>)> {
        let mut src = DeviatingPeaks {
            base: SampledPeaks::new(config.peaks),
            deviators: who,
            truths: Vec::new(),
        };
        let r = ectai::rank_devices(&devices, &cfg, &BatchPlan::Random, &mut src, ranking_seed)?;
        r.check_invariants(&devices)?;
        Ok((r, src.truths))
    };
    let ((ranking, truths), elapsed) = timed(config.timing, || run(&deviators))?;
    // Regret of each report against its batch aggregate, in request order.
    let regrets = |r: &ectai::QualityRanking, truths: &[(NodeId, f64)]| -> Vec<(NodeId, f64)> {
        let aggs = r
            .batches
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.aggregate, b.reports.len()));
        truths
            .iter()
            .zip(aggs)
            .map(|(&(v, a), agg)| (v, ectai::reviewer_regret(a, agg)))
            .collect()
    };
    let dev_regret =
        |list: &[(NodeId, f64)]| -> f64 { list.iter().filter(|(v, _)| deviators.contains(v)).map(|(_, x)| x).sum() };
    let rs = regrets(&ranking, &truths);
    let deviating = -dev_regret(&rs);
    let truthful = if deviators.is_empty() {
        deviating
    } else {
        let (t, tt) = run(&empty)?;
        -dev_regret(&regrets(&t, &tt))
    };
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "total_utility".into(),
        Metric::Real(-rs.iter().map(|(_, x)| x).sum::<f64>()),
    );
    metrics.insert("winners".into(), Metric::Count(ranking.ordered.len() as u64));
    metrics.insert("batches".into(), Metric::Count(ranking.batches.len() as u64));
    metrics.insert("deviators".into(), Metric::Count(deviators.len() as u64));
    metrics.insert("deviator_utility".into(), Metric::Real(deviating));
    metrics.insert("deviator_truthful_utility".into(), Metric::Real(truthful));
    if let Some(ms) = elapsed {
        metrics.insert("elapsed_ms".into(), Metric::Real(ms));
    }
    let witness = (!deviators.is_empty() && deviating > truthful + ectai::TIE_TOLERANCE).then_some(DeviationWitness {
        round,
        budget: None,
        deviators: deviators.len(),
        deviating_utility: Metric::Real(deviating),
        truthful_utility: Metric::Real(truthful),
    });
    let rec = RoundRecord {
        round,
        budget: None,
        metrics,
        winners: ranking.ordered.iter().map(|v| graph.original_id(*v)).collect(),
        payments: BTreeMap::new(),
    };
    Ok((rec, witness))
}

fn auction_round(
    config: &ExperimentConfig,
    graph: &SocialGraph,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RoundRecord, Option<DeviationWitness>)> {
    let n = graph.node_count();
    let m = config.tasks;
    let truth = random_additive_table(n, m, &config.values, rng)?;
    let bundles: Vec<TaskSet> = (0..n)
        .map(|_| TaskSet::from_bits(rng.random_range(1..1u32 << m)))
        .collect();
    let deviators = pick_deviators(n, config.deviation.fraction, rng)?;
    let mut reported = truth.clone();
    for &d in &deviators {
        reported.devices[d] = reported.devices[d].scaled(&config.deviation.inflation);
    }
    let run = |table: &ValuationTable| -> Result<wipd::AuctionOutcome> {
        let out = match config.mechanism {
            Mechanism::Wipd => {
                let mut oracle = ValuationOracle::new(table.clone(), config.policy);
                let out = wipd::wipd_run(m, n, &mut oracle, &WipdConfig::new(config.epsilon))?;
                out.check_invariants(&config.epsilon)?;
                out
            }
            _ => {
                let bids: Vec<GreedyBid> = bundles
                    .iter()
                    .zip(&table.devices)
                    .map(|(b, v)| GreedyBid {
                        bundle: *b,
                        bid: v.value(*b),
                    })
                    .collect();
                wipd::greedy_baseline(m, &bids)?
            }
        };
        Ok(out)
    };
    let utility = |out: &wipd::AuctionOutcome, i: usize| match config.mechanism {
        Mechanism::Wipd => wipd::policy_utility(&truth.devices[i], out.allocation[i], &out.prices, config.policy),
        _ => {
            let a = out.allocation[i];
            wipd::device_utility(&out.payments[i], &truth.devices[i].value(a), !a.is_empty())
        }
    };
    let (out, elapsed) = timed(config.timing, || run(&reported))?;
    let truthful = if deviators.is_empty() {
        out.clone()
    } else {
        run(&truth)?
    };
    let dev_u = |o: &wipd::AuctionOutcome| deviators.iter().fold(Rational::zero(), |a, &i| a + utility(o, i));
    let deviating_u = dev_u(&out);
    let truthful_u = dev_u(&truthful);
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "total_utility".into(),
        Metric::Exact((0..n).fold(Rational::zero(), |a, i| a + utility(&out, i))),
    );
    metrics.insert("total_payment".into(), Metric::Exact(out.total_payment()));
    metrics.insert(
        "winners".into(),
        Metric::Count(out.allocation.iter().filter(|a| !a.is_empty()).count() as u64),
    );
    metrics.insert("rounds".into(), Metric::Count(out.rounds as u64));
    metrics.insert("deviators".into(), Metric::Count(deviators.len() as u64));
    metrics.insert("deviator_utility".into(), Metric::Exact(deviating_u));
    metrics.insert("deviator_truthful_utility".into(), Metric::Exact(truthful_u));
    if let Some(ms) = elapsed {
        metrics.insert("elapsed_ms".into(), Metric::Real(ms));
    }
    let rec = RoundRecord {
        round,
        budget: None,
        metrics,
        winners: (0..n)
            .filter(|&i| !out.allocation[i].is_empty())
            .map(|i| graph.original_id(NodeId(i as u32)))
            .collect(),
        payments: (0..n)
            .filter(|&i| !out.allocation[i].is_empty())
            .map(|i| (graph.original_id(NodeId(i as u32)), out.payments[i]))
            .collect(),
    };
    Ok((
        rec,
        witness_if_gain(round, None, deviators.len(), deviating_u, truthful_u),
    ))
}
