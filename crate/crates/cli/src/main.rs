//! `tic`: synthesize training data, simulate the calibration loop, and
//! evaluate calibrated streams.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use source::MotionSource;

const AFTER_HELP: &str = "\
Motion sources:
  gen:active     synthetic whole-body motion
  gen:static     one held pose
  <path>         JSON-lines motion file, one frame per line:
                 {\"t\": 0, \"sensors\": [{\"R\": [9 row-major], \"a\": [3]}, ...]}

Drift schedules (entries separated by ';'):
  identity
  <sensors>.<param>=const(x,y,z)
  <sensors>.<param>=step(t_s,x,y,z)
  <sensors>.<param>=ramp(axis,deg_per_s[,start_s])
  ramp:sensor=3,axis=y,rate=0.07[,start=0][,param=drift]
  step:sensor=nonroot,t=10,x=0,y=25,z=0[,param=offset]
  const:sensor=all,x=5,y=0,z=0
where <sensors> is an index, 'all' or 'nonroot' and angles are XYZ Euler degrees.";

#[derive(Parser, Debug)]
#[command(name = "tic", version, about = "Dynamic IMU calibration toolkit", after_help = AFTER_HELP)]
struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, env = "TIC_SEED", default_value_t = 0)]
    seed: u64,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a TICD training set of measured windows and (drift, offset) labels.
    Synth(SynthArgs),
    /// Run the calibration loop on a motion stream and write per-frame metrics as CSV.
    Simulate(SimulateArgs),
    /// Rotation diversity per sensor over consecutive windows.
    Rd(RdArgs),
    /// Orientation and acceleration errors of a calibrated stream against ground truth.
    Eval(EvalArgs),
    /// Print the header and tensor table of a TICW weights file.
    WeightsInspect(WeightsInspectArgs),
    /// Write a TICW file with seeded random weights.
    WeightsInit(WeightsInitArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MotionArgs {
    /// Motion source: gen:active, gen:static or a file path.
    #[arg(long, default_value = "gen:active")]
    motion: MotionSource,

    /// Frames to generate for gen: sources.
    #[arg(long, default_value_t = 3000)]
    frames: usize,

    /// Frame rate in Hz.
    #[arg(long, default_value_t = 30.0)]
    rate: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    motion: MotionArgs,

    /// Output dataset path.
    #[arg(long, short)]
    out: PathBuf,

    /// Number of samples.
    #[arg(long, default_value_t = 1000)]
    count: usize,

    /// Window length in frames.
    #[arg(long, default_value_t = 256)]
    n: usize,

    /// Offset range ±deg on every axis.
    #[arg(long, default_value_t = 45.0)]
    offset_deg: f64,

    /// Drift tilt (x and z) range ±deg.
    #[arg(long, default_value_t = 20.0)]
    tilt_deg: f64,

    /// Non-root drift heading range ±deg.
    #[arg(long, default_value_t = 60.0)]
    heading_deg: f64,

    /// Leave gravity leakage out of the measured acceleration.
    #[arg(long)]
    no_leakage: bool,

    #[arg(long, default_value_t = tic_core::sensor_model::DEFAULT_ROOT)]
    root: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Oracle,
    Procrustes,
    Tic,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    motion: MotionArgs,

    /// Drift and offset schedule.
    #[arg(long, default_value = "identity")]
    schedule: String,

    #[arg(long, value_enum, default_value_t = EstimatorKind::Oracle)]
    estimator: EstimatorKind,

    /// TICW weights, required by the tic estimator.
    #[arg(long)]
    weights: Option<PathBuf>,

    /// Buffer length in frames.
    #[arg(long, default_value_t = 256)]
    n: usize,

    /// Seconds between estimation passes.
    #[arg(long, default_value_t = 1.0)]
    interval: f64,

    /// Per-sensor rotation diversity thresholds, comma separated, or 'off'.
    #[arg(long)]
    thresholds: Option<String>,

    #[arg(long)]
    no_leakage: bool,

    #[arg(long, default_value_t = tic_core::sensor_model::DEFAULT_ROOT)]
    root: usize,

    /// CSV output path; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Args, Debug)]
pub struct RdArgs {
    #[command(flatten)]
    motion: MotionArgs,

    /// Window length in frames.
    #[arg(long, default_value_t = 256)]
    n: usize,

    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Calibrated motion file.
    #[arg(long)]
    calibrated: PathBuf,

    /// Ground-truth motion file.
    #[arg(long)]
    truth: PathBuf,

    #[arg(long, default_value_t = tic_core::sensor_model::DEFAULT_ROOT)]
    root: usize,

    #[arg(long, default_value_t = 30.0)]
    rate: f64,

    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
pub struct WeightsInspectArgs {
    path: PathBuf,
}

#[derive(Args, Debug)]
pub struct WeightsInitArgs {
    #[arg(long, short)]
    out: PathBuf,

    #[arg(long, default_value_t = 6)]
    sensors: usize,

    #[arg(long, default_value_t = 256)]
    d_model: usize,

    #[arg(long, default_value_t = 512)]
    ffn: usize,

    /// Leave out the positional encoding.
    #[arg(long)]
    no_positional: bool,

    /// Post-norm encoder blocks instead of pre-norm.
    #[arg(long)]
    post_norm: bool,
}

/// Bad flag combinations that clap cannot express; exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a, cli.seed),
        Command::Simulate(a) => commands::simulate(&a, cli.seed),
        Command::Rd(a) => commands::rd(&a, cli.seed),
        Command::Eval(a) => commands::eval(&a),
        Command::WeightsInspect(a) => commands::weights_inspect(&a),
        Command::WeightsInit(a) => commands::weights_init(&a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
