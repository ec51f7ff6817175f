use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "radar-ego", version, about = "Radar-only planar ego-motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the odometry pipeline on a dataset.
    Run(RunArgs),
    /// Score an estimated trajectory against a reference.
    Eval(EvalArgs),
    /// Generate a synthetic dataset.
    Sim(SimArgs),
    /// Compare every preprocessor and ICP variant on one dataset.
    Sweep(SweepArgs),
    /// Run the pipeline with per-iteration ICP traces.
    Diagnose(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PreprocessorArg {
    Cfar,
    Topk,
    Raymax,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum IcpArg {
    /// Nearest-neighbor weighted ICP without sampling.
    Plain,
    OneWay,
    TwoWay,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AdapterArg {
    Coloradar,
}

#[derive(Args, Clone)]
pub struct DatasetArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Read raw binaries through an adapter instead of the native layout.
    #[arg(long, value_enum, requires = "adapter_config")]
    pub adapter: Option<AdapterArg>,
    #[arg(long)]
    pub adapter_config: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct PipelineArgs {
    /// Pipeline config (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preprocessor: Option<PreprocessorArg>,
    /// Number of Top-k points.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub icp: Option<IcpArg>,
    /// RANSAC seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Estimated trajectory (`t x y yaw` lines).
    #[arg(long)]
    pub est: PathBuf,
    /// Reference trajectory file, or a dataset directory with ground truth.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Time pairing tolerance in seconds; half the reference period if unset.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimArgs {
    /// Scene config (TOML).
    #[arg(long, conflicts_with = "fixture", required_unless_present_any = ["fixture", "list"])]
    pub scene: Option<PathBuf>,
    /// Named fixture, see --list.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Overrides the scene seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the fixture names and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long, required_unless_present = "list")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Base pipeline config; preprocessor and ICP variant are swept.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of Top-k points.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(&a, false),
        Command::Diagnose(a) => commands::run(&a, true),
        Command::Eval(a) => commands::eval(&a),
        Command::Sim(a) => commands::sim(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
