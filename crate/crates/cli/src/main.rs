//! `crowdmech` command-line simulator.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! mechanism breaks one of its invariants (for example a budget overrun).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdmech::Error;

#[derive(Parser, Debug)]
#[command(name = "crowdmech", version, about = "Crowdsourcing mechanism simulator")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarise an edge-list graph.
    GraphInfo(GraphInfoArgs),
    /// Budget-feasible notifier selection with threshold payments.
    Tenm(Tier1Args),
    /// Pay-as-bid greedy baseline.
    Ntbfm(Tier1Args),
    /// Proportional-share baseline.
    Psm(Tier1Args),
    /// Median-rule quality ranking.
    Ectai(RankingArgs),
    /// Mean-rule quality ranking baseline.
    Avr(RankingArgs),
    /// ε-increment ascending task auction.
    Wipd(AuctionArgs),
    /// Pay-as-bid greedy task allocation baseline.
    Greedy(AuctionArgs),
    /// Closed-form notification estimates and Monte Carlo checks.
    Estimate(EstimateArgs),
    /// Seeded multi-round experiment with deviation injection.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Dist {
    Uniform,
    Normal,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum DeltaScopeArg {
    #[default]
    Both,
    AllocationOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    #[default]
    PaperLiteral,
    NetGain,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    #[default]
    Lower,
    Raise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MechanismArg {
    Tenm,
    Ntbfm,
    Psm,
    Ectai,
    Avr,
    Wipd,
    Greedy,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Include wall-clock milliseconds (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct GraphInfoArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Write the `dense_id,original_id` map as CSV.
    #[arg(long)]
    id_map: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct Tier1Args {
    #[arg(long)]
    graph: PathBuf,
    /// `node_id,cost` rows; without it costs are drawn from `--cost-range`.
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Integer cost range `LO:HI` for drawn costs.
    #[arg(long, default_value = "20:50")]
    cost_range: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Budget (exact rational such as `12` or `25/2`).
    #[arg(long)]
    budget: String,
    #[arg(long, default_value = "1")]
    delta: String,
    #[arg(long, value_enum, default_value_t = DeltaScopeArg::Both)]
    delta_scope: DeltaScopeArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RankingArgs {
    /// Devices are numbered `1..=devices`.
    #[arg(long)]
    devices: usize,
    #[arg(long, default_value_t = 3)]
    f: usize,
    #[arg(long, default_value_t = 5)]
    g: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scripted batches as JSON (`[{"panel": {"entries": [[id, pos], ...]}, "reviewers": [...]}, ...]`).
    #[arg(long)]
    batches: Option<PathBuf>,
    /// Scripted peaks as `batch,reviewer,alpha` rows.
    #[arg(long)]
    peaks: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Dist::Normal)]
    dist: Dist,
    #[arg(long, default_value_t = 0.6)]
    mu: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AuctionArgs {
    /// Valuation table JSON; without it additive valuations are drawn.
    #[arg(long)]
    valuations: Option<PathBuf>,
    /// GREEDY only: `device,tasks,bid` rows with tasks like `0;2`.
    #[arg(long)]
    bids: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    devices: usize,
    #[arg(long, default_value_t = 4)]
    tasks: usize,
    /// Integer value range `LO:HI` for drawn valuations.
    #[arg(long, default_value = "30:45")]
    value_range: String,
    #[arg(long, value_enum, default_value_t = Dist::Normal)]
    dist: Dist,
    #[arg(long, default_value_t = 37.0)]
    mu: f64,
    #[arg(long, default_value_t = 8.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "1")]
    epsilon: String,
    #[arg(long, value_enum, default_value_t = PolicyArg::PaperLiteral)]
    policy: PolicyArg,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Write the demand trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    degree: usize,
    #[arg(long)]
    p: f64,
    /// Chernoff deviation κ for the tail bound at `(1+κ)·E`.
    #[arg(long)]
    kappa: Option<f64>,
    /// Monte Carlo trials; 0 skips the simulation.
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    /// Edge list; without it a random graph is drawn.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    nodes: usize,
    /// Edge probability of the drawn graph.
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    /// Exact edge count of the drawn graph (replaces `--edge-prob`).
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    rounds: usize,
    #[arg(long, default_value = "20:50")]
    cost_range: String,
    /// Budget or comma-separated budget sweep.
    #[arg(long, default_value = "15000")]
    budget: String,
    #[arg(long, default_value = "1")]
    delta: String,
    #[arg(long, value_enum, default_value_t = DeltaScopeArg::Both)]
    delta_scope: DeltaScopeArg,
    #[arg(long, default_value_t = 0.0)]
    deviation_frac: f64,
    /// Tier one: amount a deviator shifts its cost by.
    #[arg(long, default_value = "5")]
    deviation_delta: String,
    #[arg(long, value_enum, default_value_t = DirectionArg::Lower)]
    deviation_direction: DirectionArg,
    /// WiPD and GREEDY: factor a deviator scales its valuation by.
    #[arg(long, default_value = "6/5")]
    inflation: String,
    /// Peak distribution (ECTAI, AVR) or valuation distribution (WiPD, GREEDY).
    #[arg(long, value_enum)]
    dist: Option<Dist>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 3)]
    f: usize,
    #[arg(long, default_value_t = 5)]
    g: usize,
    #[arg(long, default_value_t = 4)]
    tasks: usize,
    #[arg(long, default_value = "30:45")]
    value_range: String,
    #[arg(long, default_value = "1")]
    epsilon: String,
    #[arg(long, value_enum, default_value_t = PolicyArg::PaperLiteral)]
    policy: PolicyArg,
    #[command(flatten)]
    output: OutputArgs,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) | Error::NonTermination { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
