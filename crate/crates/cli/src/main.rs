use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "fuzzyrel",
    version,
    about = "Learn fuzzy spatial relations, annotate segments, explain the result"
)]
struct Cli {
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    GpEi,
    Random,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset of nine-organ images.
    Synth(SynthArgs),
    /// Mine class models from a labelled dataset and write a model file.
    Train(TrainArgs),
    /// Label the segments of each image and explain every label.
    Annotate(AnnotateArgs),
    /// Nested cross-validation with threshold tuning.
    Crossval(CrossvalArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, env = "FUZZYREL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(32..=1024))]
    pub size: u64,
    /// Place every organ at its canonical position.
    #[arg(long)]
    pub no_jitter: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Vocabulary TOML file; the built-in default vocabulary otherwise.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// One threshold for every class, one per class in label order, or `label=value` pairs.
    #[arg(long, conflicts_with = "tune")]
    pub thresholds: Option<String>,
    /// Tune thresholds by inner cross-validation before training.
    #[arg(long)]
    pub tune: bool,
    #[arg(long, default_value_t = 4)]
    pub inner: usize,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::GpEi)]
    pub strategy: StrategyArg,
    #[arg(long, env = "FUZZYREL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Train on the first N complete images only.
    #[arg(long)]
    pub take: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub explain: Switch,
    /// Skip the first N images of the manifest.
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    /// Write the output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub outer: usize,
    #[arg(long, default_value_t = 4)]
    pub inner: usize,
    #[arg(long, env = "FUZZYREL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::GpEi)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    /// Report file (JSON Lines); a `.tsv` table is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("FUZZYREL_LOG")
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Annotate(a) => commands::annotate(&a),
        Command::Crossval(a) => commands::crossval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
