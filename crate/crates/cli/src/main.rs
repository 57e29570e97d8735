use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(name = "foa", version, about = "Simulate scenes, design and apply FOA encoders, evaluate estimates")]
pub struct Cli {
    /// Base seed for scene sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a dataset of reverberant scenes.
    Simulate(SimulateArgs),
    /// Design the least-squares baseline encoder and write it as AMBENC1.
    DesignBaseline(DesignArgs),
    /// Apply an encoding matrix to microphone signals.
    Encode(EncodeArgs),
    /// Compute metrics of baseline (and optionally learned) estimates.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Dataset root.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scenes: Option<usize>,
    /// `tetra`, `irregular` or an array JSON file.
    #[arg(long)]
    pub array: Option<String>,
    /// Directory of mono wav clips; synthetic sources when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Output AMBENC1 file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub array: Option<String>,
    /// Row gain limit in dB.
    #[arg(long)]
    pub gain_cap_db: Option<f64>,
    /// Skip the diffuse-field EQ above the aliasing frequency.
    #[arg(long)]
    pub no_eq: bool,
    /// Print per-channel maximum row gains.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// AMBENC1 or AMBTFE1 matrix.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Multichannel microphone wav.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub input: Option<PathBuf>,
    /// Encoded Ambisonics wav (single-file mode).
    #[arg(long, requires = "input")]
    pub out_wav: Option<PathBuf>,
    /// Encoded STFT as AMBTEN1 (single-file mode).
    #[arg(long, requires = "input")]
    pub out_tensor: Option<PathBuf>,
    /// Encode every scene of a dataset split instead.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "test", requires = "dataset")]
    pub split: String,
    /// Estimates root for dataset mode.
    #[arg(long, requires = "dataset")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset root.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Output directory for CSV reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Baseline AMBENC1 file; designed per array when absent.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Estimates root laid out as `<root>/<split>/<scene_id>/`.
    #[arg(long)]
    pub learned: Option<PathBuf>,
    /// Loss-weight JSON.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
