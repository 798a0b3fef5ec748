//! `clauseprobe` command-line runner.
//!
//! Every command prints a text report to stdout and, with `--out`, writes
//! the same content as JSON next to its artifacts. Set `CLAUSEPROBE_LOG`
//! (e.g. `info`, `debug`) for progress logging.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clauseprobe::synthlang::{CompPosition, WordOrder};
use clauseprobe::taskdata::SentenceFilter;
use clauseprobe::typology::HeadAggregation;

#[derive(Parser)]
#[command(name = "clauseprobe", version, about = "Main-vs-subordinate clause probing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract labeled predicates from every manifest corpus.
    BuildDataset(BuildDatasetArgs),
    /// Train a probe on the manifest's train corpora.
    Train(TrainArgs),
    /// Apply trained checkpoints to every test corpus.
    Zeroshot(ZeroshotArgs),
    /// Head-direction and marker-position statistics per corpus.
    Typology(TypologyArgs),
    /// Attention mass from subordinate predicates to their markers.
    AttnReport(AttnArgs),
    /// Generate a synthetic treebank.
    Synth(SynthArgs),
    /// Majority-class (always SUB) accuracy per corpus.
    Baseline(BaselineArgs),
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Corpus manifest (JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level seed; recorded in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `toy` or `file:DIR`, where DIR holds one `<entry>.clprb` per corpus.
    #[arg(long, default_value = "toy")]
    pub backend: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// JSON run configuration (training and toy encoder settings).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Skip invalid sentences instead of rejecting the corpus.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Args)]
pub struct BuildDatasetArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "all")]
    pub filter: FilterArg,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FilterArg {
    All,
    /// Only sentences containing a subordinate predicate.
    Complex,
}

impl From<FilterArg> for SentenceFilter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::All => SentenceFilter::All,
            FilterArg::Complex => SentenceFilter::Complex,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Five epochs, best epoch on dev data.
    Single,
    /// Two epochs, final parameters.
    ZeroShot,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "single")]
    pub mode: Mode,
    /// Learning rate override.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Checkpoint name; defaults to the train corpus names joined by `+`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args)]
pub struct ZeroshotArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint files; each becomes one row named after its file stem.
    #[arg(long = "checkpoint", required = true, num_args = 1..)]
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Args)]
pub struct TypologyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Deprels to report; defaults to the clausal relations.
    #[arg(long, value_delimiter = ',')]
    pub deprels: Vec<String>,
}

#[derive(Args)]
pub struct AttnArgs {
    #[command(flatten)]
    pub common: Common,
    /// Toy-encoder checkpoint; required with the `toy` backend.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Use the untrained encoder of the checkpoint's configuration and seed.
    #[arg(long)]
    pub untrained: bool,
    #[arg(long, value_enum, default_value = "mean")]
    pub heads: HeadsArg,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum HeadsArg {
    Mean,
    Max,
}

impl From<HeadsArg> for HeadAggregation {
    fn from(h: HeadsArg) -> Self {
        match h {
            HeadsArg::Mean => HeadAggregation::Mean,
            HeadsArg::Max => HeadAggregation::Max,
        }
    }
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "svo")]
    pub order: OrderArg,
    /// Marker position; defaults to post for SOV and pre otherwise.
    #[arg(long, value_enum)]
    pub comp: Option<CompArg>,
    #[arg(long, default_value_t = 1000)]
    pub sentences: usize,
    /// Split off the first N sentences as a train corpus; the rest is test.
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Svo,
    Sov,
    Vso,
}

impl From<OrderArg> for WordOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Svo => WordOrder::Svo,
            OrderArg::Sov => WordOrder::Sov,
            OrderArg::Vso => WordOrder::Vso,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CompArg {
    Pre,
    Post,
}

impl From<CompArg> for CompPosition {
    fn from(c: CompArg) -> Self {
        match c {
            CompArg::Pre => CompPosition::Pre,
            CompArg::Post => CompPosition::Post,
        }
    }
}

#[derive(Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CLAUSEPROBE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildDataset(a) => commands::build_dataset(&a),
        Command::Train(a) => commands::train(&a),
        Command::Zeroshot(a) => commands::zeroshot(&a),
        Command::Typology(a) => commands::typology(&a),
        Command::AttnReport(a) => commands::attn_report(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Baseline(a) => commands::baseline(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
