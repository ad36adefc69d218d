//! `sniforge`: identify web services in encrypted traffic from flow
//! statistics and packet sequences, with SNI hostnames as ground truth.

mod commands;
mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sniforge_core::ingest::Ipv4Cidr;
use sniforge_neural::CnnRnnWidths;
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(name = "sniforge", version, about)]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, env = "SNIFORGE_SEED", default_value_t = 42)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log filter for the JSON-lines log on stderr (e.g. `warn`, `sniforge_core=debug`).
    #[arg(long, global = true, env = "SNIFORGE_LOG", default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read pcap files, assemble TCP flows, label them by SNI and write a flow file.
    Ingest(IngestArgs),
    /// Extract the statistical and sequence datasets from a flow file.
    Featurize(FeaturizeArgs),
    /// Generate a synthetic labeled capture.
    Synth(SynthArgs),
    /// Train one classifier on a dataset and save it.
    Train(TrainArgs),
    /// Cross-validate every classifier and ensemble across min-connections thresholds.
    Evaluate(EvaluateArgs),
    /// Validate an evaluation report, print a summary and export plot data.
    Report(ReportArgs),
}

fn parse_cidr(s: &str) -> Result<Ipv4Cidr, String> {
    s.parse().map_err(|e: sniforge_core::Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(required = true)]
    pub pcaps: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Client-side network (repeatable); defaults to the RFC 1918 ranges.
    #[arg(long = "local-net", value_name = "CIDR", value_parser = parse_cidr)]
    pub local_nets: Vec<Ipv4Cidr>,
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    pub flows: PathBuf,
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub sequences: PathBuf,
    /// Sequence length.
    #[arg(long, default_value_t = sniforge_core::features::DEFAULT_SEQ_LEN)]
    pub n: usize,
    /// Add the packet direction channel to the sequence file.
    #[arg(long)]
    pub direction: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub out: PathBuf,
    /// JSON file with `flows_per_class` and `profiles`; overrides the built-in profiles.
    #[arg(long, conflicts_with_all = ["classes", "flows_per_class"])]
    pub profiles: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub flows_per_class: usize,
    /// Also write the generated flows as a flow file.
    #[arg(long)]
    pub flows: Option<PathBuf>,
    #[arg(long = "local-net", value_name = "CIDR", value_parser = parse_cidr)]
    pub local_nets: Vec<Ipv4Cidr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Arch {
    /// Full widths: 200/400 conv filters, 200 GRU units.
    Full,
    /// Reduced widths: 32/64 conv filters, 32 GRU units.
    Small,
}

impl Arch {
    pub fn widths(self) -> CnnRnnWidths {
        match self {
            Arch::Full => CnnRnnWidths::FULL,
            Arch::Small => CnnRnnWidths::SMALL,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct NeuralArgs {
    #[arg(long, value_enum, default_value_t = Arch::Full)]
    pub arch: Arch,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Share of each class in the training data held out for early stopping.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    /// Hidden units of the two-layer GRU baseline.
    #[arg(long, default_value_t = sniforge_neural::spec::BASELINE_HIDDEN)]
    pub baseline_hidden: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Rf,
    Packet,
    Payload,
    Iat,
    BaselineRnn,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Statistical dataset (for `rf`).
    #[arg(long, required_if_eq("model", "rf"))]
    pub stats: Option<PathBuf>,
    /// Sequence dataset (for the neural models).
    #[arg(long, required_if_eq_any([("model", "packet"), ("model", "payload"), ("model", "iat"), ("model", "baseline-rnn")]))]
    pub sequences: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Drop classes with fewer flows before training.
    #[arg(long, default_value_t = 1)]
    pub min_connections: usize,
    /// Append the direction channel (the sequence file must carry it).
    #[arg(long)]
    pub direction: bool,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[command(flatten)]
    pub neural: NeuralArgs,
}

fn parse_weights(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> =
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 weights (rf, packet, payload, iat), got {}", v.len()))
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub sequences: PathBuf,
    /// Report JSON.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Directory for the plot-data CSVs.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub thresholds: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// `all`, `rf-only`, `dl-only`, or a comma list of `rf`, `cnn-rnn`, `baseline-rnn`.
    #[arg(long, default_value = "all")]
    pub classifiers: String,
    /// Combined-ensemble weights for rf, packet, payload, iat.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<[f64; 4]>,
    /// Feed forest log-probabilities into the combined ensemble.
    #[arg(long)]
    pub rf_log_proba: bool,
    /// Also evaluate sequence models with the direction channel.
    #[arg(long)]
    pub direction: bool,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[command(flatten)]
    pub neural: NeuralArgs,
    /// Record wall-clock timings in the report (breaks byte-reproducibility).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub report: PathBuf,
    #[arg(long)]
    pub plots: Option<PathBuf>,
    /// Print the validated report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

fn main() {
    let cli = Cli::parse();
    let filter = EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt().json().with_env_filter(filter).with_writer(std::io::stderr).init();
    if let Err(e) = run(cli) {
        tracing::error!(error = %format!("{e:#}"), "failed");
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global().context("thread pool")?;
    }
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a, cli.seed),
        Command::Featurize(a) => commands::featurize(&a, cli.seed),
        Command::Synth(a) => commands::synth(&a, cli.seed),
        Command::Train(a) => commands::train(&a, cli.seed),
        Command::Evaluate(a) => commands::evaluate(&a, cli.seed),
        Command::Report(a) => commands::report(&a),
    }
}
