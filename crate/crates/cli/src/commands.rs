use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crowdmech::ectai::{
    self, BatchPlan, PeakDistribution, PeakSource, QualityRanking, SampledPeaks, ScriptedBatch, ScriptedPeaks,
};
use crowdmech::graph::load_edge_list;
use crowdmech::harness::instances::{random_additive_table, ValueDistribution};
use crowdmech::harness::witness::Tier1Mechanism;
use crowdmech::harness::{
    self, digest_hex, graph_digest, CostDirection, ExperimentConfig, GraphSource, Mechanism, REPORT_SCHEMA_VERSION,
};
use crowdmech::prob::{self, MonteCarloEstimate, NotifyModel};
use crowdmech::rational::{self, Rational};
use crowdmech::tenm::{Budget, CostProfile, DeltaScope, TenmConfig};
use crowdmech::wipd::{
    self, AuctionOutcome, DemandPolicy, GreedyBid, TaskId, TaskSet, ValuationOracle, ValuationTable, WipdConfig,
};
use crowdmech::{Error, NodeId, Result, SocialGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{
    AuctionArgs, Command, DeltaScopeArg, DirectionArg, Dist, EstimateArgs, ExperimentArgs, Format, GraphInfoArgs,
    MechanismArg, OutputArgs, PolicyArg, RankingArgs, Tier1Args,
};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GraphInfo(a) => graph_info(a),
        Command::Tenm(a) => tier1(Mechanism::Tenm, a),
        Command::Ntbfm(a) => tier1(Mechanism::Ntbfm, a),
        Command::Psm(a) => tier1(Mechanism::Psm, a),
        Command::Ectai(a) => ranking(Mechanism::Ectai, a),
        Command::Avr(a) => ranking(Mechanism::Avr, a),
        Command::Wipd(a) => auction(Mechanism::Wipd, a),
        Command::Greedy(a) => auction(Mechanism::Greedy, a),
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<SocialGraph> {
    load_edge_list(open(path)?)
}

fn parse_rational(flag: &str, text: &str) -> Result<Rational> {
    rational::parse(text).map_err(|_| config_err(format!("--{flag}: not a rational number: {text:?}")))
}

fn parse_range(flag: &str, text: &str) -> Result<(i64, i64)> {
    let bad = || config_err(format!("--{flag}: expected LO:HI, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn exact(r: &Rational) -> String {
    rational::to_exact_string(r)
}

/// Writes `body` to `--out` or standard output.
fn emit(out: &OutputArgs, body: &[u8]) -> Result<()> {
    match &out.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(body)?;
            w.flush()?;
        }
        None => std::io::stdout().lock().write_all(body)?,
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn elapsed_ms(out: &OutputArgs, start: Instant) -> Option<f64> {
    out.timing.then(|| start.elapsed().as_secs_f64() * 1e3)
}

fn delta_scope(a: DeltaScopeArg) -> DeltaScope {
    match a {
        DeltaScopeArg::Both => DeltaScope::Both,
        DeltaScopeArg::AllocationOnly => DeltaScope::AllocationOnly,
    }
}

fn policy(a: PolicyArg) -> DemandPolicy {
    match a {
        PolicyArg::PaperLiteral => DemandPolicy::PaperLiteral,
        PolicyArg::NetGain => DemandPolicy::NetGain,
    }
}

fn peak_distribution(dist: Dist, mu: f64, sigma: f64) -> PeakDistribution {
    match dist {
        Dist::Uniform => PeakDistribution::Uniform,
        Dist::Normal => PeakDistribution::Normal { mu, sigma },
    }
}

fn value_distribution(dist: Dist, mu: f64, sigma: f64, (lo, hi): (i64, i64)) -> ValueDistribution {
    match dist {
        Dist::Uniform => ValueDistribution::Uniform { lo, hi },
        Dist::Normal => ValueDistribution::Normal { mu, sigma, lo, hi },
    }
}

#[derive(Serialize)]
struct DegreeStats {
    min: usize,
    max: usize,
    mean: f64,
    isolated: usize,
}

#[derive(Serialize)]
struct GraphInfo {
    schema_version: u32,
    nodes: usize,
    edges: usize,
    degree: DegreeStats,
    digest: String,
}

fn graph_info(a: GraphInfoArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    if let Some(path) = &a.id_map {
        let mut w = BufWriter::new(File::create(path)?);
        g.write_id_map_csv(&mut w)?;
        w.flush()?;
    }
    let degrees: Vec<usize> = g.nodes().map(|v| g.degree(v)).collect();
    let n = degrees.len();
    let info = GraphInfo {
        schema_version: REPORT_SCHEMA_VERSION,
        nodes: n,
        edges: g.edge_count(),
        degree: DegreeStats {
            min: degrees.iter().copied().min().unwrap_or(0),
            max: degrees.iter().copied().max().unwrap_or(0),
            mean: if n == 0 {
                0.0
            } else {
                degrees.iter().sum::<usize>() as f64 / n as f64
            },
            isolated: degrees.iter().filter(|&&d| d == 0).count(),
        },
        digest: graph_digest(&g),
    };
    let body = match a.output.format {
        Format::Json => json(&info)?,
        Format::Csv => format!(
            "nodes,edges,min_degree,max_degree,mean_degree,isolated,digest\n{},{},{},{},{},{},{}\n",
            info.nodes,
            info.edges,
            info.degree.min,
            info.degree.max,
            info.degree.mean,
            info.degree.isolated,
            info.digest
        )
        .into_bytes(),
    };
    emit(&a.output, &body)
}

#[derive(Serialize)]
struct Tier1Report {
    schema_version: u32,
    mechanism: &'static str,
    inputs_digest: String,
    /// Set when costs were drawn rather than read.
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    budget: String,
    delta: String,
    delta_scope: DeltaScope,
    /// Original ids in selection order.
    selected: Vec<u64>,
    notified: Vec<u64>,
    payments: BTreeMap<u64, String>,
    total_payment: String,
    budget_feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

fn tier1(mech: Mechanism, a: Tier1Args) -> Result<()> {
    let start = Instant::now();
    let graph = load_graph(&a.graph)?;
    let budget = Budget::new(parse_rational("budget", &a.budget)?)
        .map_err(|_| config_err(format!("--budget must be positive, got {}", a.budget)))?;
    let delta = parse_rational("delta", &a.delta)?;
    if delta <= Rational::from_integer(0) {
        return Err(config_err("--delta must be positive"));
    }
    let cfg = TenmConfig {
        delta,
        delta_scope: delta_scope(a.delta_scope),
    };
    let (costs, seed) = match &a.costs {
        Some(path) => (CostProfile::from_csv(&graph, open(path)?)?, None),
        None => {
            let (lo, hi) = parse_range("cost-range", &a.cost_range)?;
            if lo < 1 {
                return Err(config_err("--cost-range must start at 1 or above"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            (
                CostProfile::uniform_integers(graph.node_count(), lo, hi, &mut rng)?,
                Some(a.seed),
            )
        }
    };
    let mechanism = match mech {
        Mechanism::Ntbfm => Tier1Mechanism::Ntbfm,
        Mechanism::Psm => Tier1Mechanism::Psm,
        _ => Tier1Mechanism::Tenm(cfg.clone()),
    };
    let out = mechanism.run(&graph, &costs, &budget)?;
    out.check_invariants(&costs, &budget)?;

    let cost_text: String = graph
        .nodes()
        .map(|v| {
            let c = costs.get(v).map(exact).unwrap_or_else(|| "-".into());
            format!("{},{}\n", graph.original_id(v), c)
        })
        .collect();
    let settings = format!(
        "{} {} {} {:?}",
        mech.name(),
        exact(budget.amount()),
        exact(&cfg.delta),
        cfg.delta_scope
    );
    let inputs_digest = digest_hex(&[
        graph_digest(&graph).as_bytes(),
        cost_text.as_bytes(),
        settings.as_bytes(),
    ]);
    let orig = |v: &NodeId| graph.original_id(*v);
    let total = out.total_payment();
    let report = Tier1Report {
        schema_version: REPORT_SCHEMA_VERSION,
        mechanism: mech.name(),
        inputs_digest,
        seed,
        budget: exact(budget.amount()),
        delta: exact(&cfg.delta),
        delta_scope: cfg.delta_scope,
        selected: out.selected.iter().map(orig).collect(),
        notified: out.notified.iter().map(orig).collect(),
        payments: out.payments.iter().map(|(v, p)| (orig(v), exact(p))).collect(),
        budget_feasible: &total <= budget.amount(),
        total_payment: exact(&total),
        elapsed_ms: elapsed_ms(&a.output, start),
    };
    let body = match a.output.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = String::from("node_id,cost,selected,payment\n");
            for v in graph.nodes() {
                let c = costs.get(v).map(exact).unwrap_or_default();
                let paid = out.payments.get(&v).map(exact).unwrap_or_default();
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    graph.original_id(v),
                    c,
                    out.is_selected(v),
                    paid
                ));
            }
            s.into_bytes()
        }
    };
    emit(&a.output, &body)
}

#[derive(Serialize)]
struct RankingReport {
    schema_version: u32,
    mechanism: &'static str,
    inputs_digest: String,
    seed: u64,
    devices: usize,
    f: usize,
    g: usize,
    #[serde(flatten)]
    ranking: QualityRanking,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

fn ranking(mech: Mechanism, a: RankingArgs) -> Result<()> {
    let start = Instant::now();
    let devices: Vec<NodeId> = (1..=a.devices as u32).map(NodeId).collect();
    let mut raw = String::new();
    let plan = match &a.batches {
        Some(path) => {
            open(path)?.read_to_string(&mut raw)?;
            BatchPlan::Scripted(serde_json::from_str::<Vec<ScriptedBatch>>(&raw)?)
        }
        None => BatchPlan::Random,
    };
    let mut peak_text = String::new();
    let mut source: Box<dyn PeakSource> = match &a.peaks {
        Some(path) => {
            open(path)?.read_to_string(&mut peak_text)?;
            Box::new(ScriptedPeaks::from_csv(peak_text.as_bytes())?)
        }
        None => {
            let d = peak_distribution(a.dist, a.mu, a.sigma);
            d.validate()?;
            peak_text = serde_json::to_string(&d)?;
            Box::new(SampledPeaks::new(d))
        }
    };
    let result = match mech {
        Mechanism::Avr => ectai::avr_run(&devices, a.f, a.g, &plan, source.as_mut(), a.seed)?,
        _ => ectai::ectai_run(&devices, a.f, a.g, &plan, source.as_mut(), a.seed)?,
    };
    result.check_invariants(&devices)?;
    let settings = format!("{} {} {} {} {}", mech.name(), a.devices, a.f, a.g, a.seed);
    let report = RankingReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mechanism: mech.name(),
        inputs_digest: digest_hex(&[settings.as_bytes(), raw.as_bytes(), peak_text.as_bytes()]),
        seed: a.seed,
        devices: a.devices,
        f: a.f,
        g: a.g,
        ranking: result,
        elapsed_ms: elapsed_ms(&a.output, start),
    };
    let body = match a.output.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = String::from("batch,winner,aggregate,panel,reports\n");
            for b in &report.ranking.batches {
                let panel: Vec<String> = b.panel.entries.iter().map(|(d, p)| format!("{d}:{p}")).collect();
                let reports: Vec<String> = b
                    .reports
                    .iter()
                    .map(|r| format!("{}:{}", r.reviewer, r.alpha))
                    .collect();
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    b.batch,
                    b.winner,
                    b.aggregate,
                    panel.join(";"),
                    reports.join(";")
                ));
            }
            s.into_bytes()
        }
    };
    emit(&a.output, &body)
}

#[derive(Serialize)]
struct AuctionReport {
    schema_version: u32,
    mechanism: &'static str,
    inputs_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    tasks: usize,
    devices: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<DemandPolicy>,
    allocation: Vec<TaskSet>,
    payments: Vec<String>,
    prices: Vec<String>,
    rounds: usize,
    total_payment: String,
    /// Each device's objective for its final holding; WiPD only.
    #[serde(skip_serializing_if = "Option::is_none")]
    utilities: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

/// Parses `device,tasks,bid` rows; devices must be `0..n`, each once.
fn read_bids(path: &Path) -> Result<Vec<GreedyBid>> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    let mut rows: BTreeMap<usize, GreedyBid> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("device")) {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: i + 1,
            message: m.to_string(),
        };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(bad("expected device,tasks,bid"));
        }
        let device: usize = cols[0]
            .parse()
            .map_err(|_| bad("device must be a non-negative integer"))?;
        let mut bundle = TaskSet::EMPTY;
        for t in cols[1].split(';').filter(|t| !t.is_empty()) {
            let t: u8 = t.trim().parse().map_err(|_| bad("task ids must be small integers"))?;
            if t as usize >= wipd::MAX_TASKS {
                return Err(bad("task id out of range"));
            }
            bundle = bundle.with(TaskId(t));
        }
        let bid = rational::parse(cols[2]).map_err(|_| bad("bid must be a rational number"))?;
        if rows.insert(device, GreedyBid { bundle, bid }).is_some() {
            return Err(bad("device listed twice"));
        }
    }
    if rows.keys().copied().ne(0..rows.len()) {
        return Err(config_err("bid devices must be numbered 0..n without gaps"));
    }
    Ok(rows.into_values().collect())
}

fn auction(mech: Mechanism, a: AuctionArgs) -> Result<()> {
    let start = Instant::now();
    let epsilon = parse_rational("epsilon", &a.epsilon)?;
    let pol = policy(a.policy);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut seed = None;
    let mut source = String::new();
    let mut table = None;
    let (tasks, bids) = if let (Mechanism::Greedy, Some(path)) = (mech, &a.bids) {
        let bids = read_bids(path)?;
        source = format!("{:?}", bids);
        (a.tasks, Some(bids))
    } else {
        let t = match &a.valuations {
            Some(path) => {
                let t = ValuationTable::from_json(open(path)?)?;
                source = t.to_json()?;
                t
            }
            None => {
                if a.tasks == 0 || a.tasks > wipd::DEMAND_TASK_CAP {
                    return Err(config_err(format!("--tasks must be in 1..={}", wipd::DEMAND_TASK_CAP)));
                }
                let dist = value_distribution(a.dist, a.mu, a.sigma, parse_range("value-range", &a.value_range)?);
                seed = Some(a.seed);
                random_additive_table(a.devices, a.tasks, &dist, &mut rng)?
            }
        };
        let m = t.tasks;
        let bids = (mech == Mechanism::Greedy).then(|| {
            t.devices
                .iter()
                .map(|v| {
                    let bundle = if a.valuations.is_some() {
                        TaskSet::full(m)
                    } else {
                        TaskSet::from_bits(rng.random_range(1..1u32 << m))
                    };
                    GreedyBid {
                        bundle,
                        bid: v.value(bundle),
                    }
                })
                .collect()
        });
        table = Some(t);
        (m, bids)
    };

    let outcome: AuctionOutcome = match (&bids, &table) {
        (Some(bids), _) => wipd::greedy_baseline(tasks, bids)?,
        (None, Some(t)) => {
            let mut oracle = ValuationOracle::new(t.clone(), pol);
            let cfg = WipdConfig {
                epsilon,
                max_rounds: a.max_rounds,
            };
            match wipd::wipd_run(tasks, t.devices.len(), &mut oracle, &cfg) {
                Ok(o) => {
                    o.check_invariants(&epsilon)?;
                    o
                }
                Err(Error::NonTermination { max_rounds, trace }) => {
                    if let Some(path) = &a.trace {
                        wipd::write_trace_csv(&trace, BufWriter::new(File::create(path)?))?;
                    }
                    return Err(Error::NonTermination { max_rounds, trace });
                }
                Err(e) => return Err(e),
            }
        }
        (None, None) => unreachable!("either bids or a table is present"),
    };
    if let Some(path) = &a.trace {
        let mut w = BufWriter::new(File::create(path)?);
        wipd::write_trace_csv(&outcome.trace, &mut w)?;
        w.flush()?;
    }
    let is_wipd = mech == Mechanism::Wipd;
    let utilities = match (&table, is_wipd) {
        (Some(t), true) => Some(
            t.devices
                .iter()
                .zip(&outcome.allocation)
                .map(|(v, s)| exact(&wipd::policy_utility(v, *s, &outcome.prices, pol)))
                .collect(),
        ),
        _ => None,
    };
    let settings = format!(
        "{} {} {:?} {:?} {}",
        mech.name(),
        exact(&epsilon),
        pol,
        a.max_rounds,
        tasks
    );
    let report = AuctionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mechanism: mech.name(),
        inputs_digest: digest_hex(&[settings.as_bytes(), source.as_bytes(), format!("{seed:?}").as_bytes()]),
        seed,
        tasks,
        devices: outcome.allocation.len(),
        epsilon: is_wipd.then(|| exact(&epsilon)),
        policy: is_wipd.then_some(pol),
        allocation: outcome.allocation.clone(),
        payments: outcome.payments.iter().map(exact).collect(),
        prices: outcome.prices.iter().map(exact).collect(),
        rounds: outcome.rounds,
        total_payment: exact(&outcome.total_payment()),
        utilities,
        elapsed_ms: elapsed_ms(&a.output, start),
    };
    let body = match a.output.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = String::from("device,allocation,payment\n");
            for (i, (set, pay)) in report.allocation.iter().zip(&report.payments).enumerate() {
                let tasks: Vec<String> = set.iter().map(|t| t.0.to_string()).collect();
                s.push_str(&format!("{i},{},{pay}\n", tasks.join(";")));
            }
            s.into_bytes()
        }
    };
    emit(&a.output, &body)
}

#[derive(Serialize)]
struct EstimateRow {
    estimator: &'static str,
    params: String,
    value: f64,
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let model = NotifyModel::new(a.degree, a.p).map_err(|e| config_err(e.to_string()))?;
    let e = prob::expected_notified(&model);
    let alo = prob::at_least_one(&model);
    let base = format!("degree={} p={}", a.degree, a.p);
    let mut rows = vec![
        EstimateRow {
            estimator: "expected_notified",
            params: base.clone(),
            value: e,
        },
        EstimateRow {
            estimator: "at_least_one_exact",
            params: base.clone(),
            value: alo.exact,
        },
        EstimateRow {
            estimator: "at_least_one_bound",
            params: base.clone(),
            value: alo.bound,
        },
    ];
    if a.degree > 2 {
        rows.push(EstimateRow {
            estimator: "high_degree_tail_bound",
            params: format!("degree={} threshold={}", a.degree, prob::lemma1_threshold(a.degree)),
            value: prob::lemma1_bound(a.degree)?,
        });
    }
    if let Some(kappa) = a.kappa {
        rows.push(EstimateRow {
            estimator: "chernoff_tail",
            params: format!("{base} kappa={kappa}"),
            value: prob::chernoff_tail(e, kappa).map_err(|e| config_err(e.to_string()))?,
        });
    }
    if a.trials > 0 {
        let samples = prob::sample_notified(&model, a.trials, a.seed);
        let mc = MonteCarloEstimate::from_samples(&samples);
        let params = format!("{base} trials={} seed={}", a.trials, a.seed);
        rows.push(EstimateRow {
            estimator: "monte_carlo_mean",
            params: params.clone(),
            value: mc.mean,
        });
        rows.push(EstimateRow {
            estimator: "monte_carlo_stderr",
            params: params.clone(),
            value: mc.stderr,
        });
        if let Some(kappa) = a.kappa {
            rows.push(EstimateRow {
                estimator: "monte_carlo_tail",
                params: format!("{params} kappa={kappa}"),
                value: prob::empirical_tail(&samples, (1.0 + kappa) * e),
            });
        }
    }
    match &a.output.out {
        Some(_) => {
            let body = match a.output.format {
                Format::Json => json(&rows)?,
                Format::Csv => {
                    let mut s = String::from("estimator,params,value\n");
                    for r in &rows {
                        s.push_str(&format!("{},{},{:?}\n", r.estimator, r.params, r.value));
                    }
                    s.into_bytes()
                }
            };
            emit(&a.output, &body)
        }
        None => {
            let mut s = format!("{e:?}\n");
            for r in &rows[1..] {
                s.push_str(&format!("{} {:?}\n", r.estimator, r.value));
            }
            emit(&a.output, s.as_bytes())
        }
    }
}

fn mechanism(m: MechanismArg) -> Mechanism {
    match m {
        MechanismArg::Tenm => Mechanism::Tenm,
        MechanismArg::Ntbfm => Mechanism::Ntbfm,
        MechanismArg::Psm => Mechanism::Psm,
        MechanismArg::Ectai => Mechanism::Ectai,
        MechanismArg::Avr => Mechanism::Avr,
        MechanismArg::Wipd => Mechanism::Wipd,
        MechanismArg::Greedy => Mechanism::Greedy,
    }
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mech = mechanism(a.mechanism);
    let graph = match (&a.graph, a.edges) {
        (Some(path), _) => GraphSource::File {
            path: PathBuf::from(path),
        },
        (None, Some(edges)) => GraphSource::RandomEdges { nodes: a.nodes, edges },
        (None, None) => GraphSource::Random {
            nodes: a.nodes,
            edge_prob: a.edge_prob,
        },
    };
    let mut cfg = ExperimentConfig::new(mech, graph);
    cfg.seed = a.seed;
    cfg.rounds = a.rounds;
    cfg.cost_range = parse_range("cost-range", &a.cost_range)?;
    cfg.budgets = a
        .budget
        .split(',')
        .map(|b| parse_rational("budget", b))
        .collect::<Result<_>>()?;
    cfg.delta = parse_rational("delta", &a.delta)?;
    cfg.delta_scope = delta_scope(a.delta_scope);
    cfg.deviation.fraction = a.deviation_frac;
    cfg.deviation.cost_delta = parse_rational("deviation-delta", &a.deviation_delta)?;
    cfg.deviation.cost_direction = match a.deviation_direction {
        DirectionArg::Lower => CostDirection::Lower,
        DirectionArg::Raise => CostDirection::Raise,
    };
    cfg.deviation.inflation = parse_rational("inflation", &a.inflation)?;
    cfg.f = a.f;
    cfg.g = a.g;
    cfg.tasks = a.tasks;
    cfg.epsilon = parse_rational("epsilon", &a.epsilon)?;
    cfg.policy = policy(a.policy);
    cfg.timing = a.output.timing;
    match mech {
        Mechanism::Ectai | Mechanism::Avr => {
            cfg.peaks = peak_distribution(
                a.dist.unwrap_or(Dist::Normal),
                a.mu.unwrap_or(0.6),
                a.sigma.unwrap_or(0.3),
            );
        }
        Mechanism::Wipd | Mechanism::Greedy => {
            let range = parse_range("value-range", &a.value_range)?;
            cfg.values = value_distribution(
                a.dist.unwrap_or(Dist::Normal),
                a.mu.unwrap_or(37.0),
                a.sigma.unwrap_or(8.0),
                range,
            );
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(&a)?;
    let report = harness::run_experiment(&cfg)?;
    let body = match a.output.format {
        Format::Json => report.to_json()?.into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
    };
    emit(&a.output, &body)
}
