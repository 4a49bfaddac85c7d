use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Learning-rate schedules (step, exponential, two-stage, cosine, HTD),
/// their analytic checks, and deterministic SGD training experiments.
///
/// Runs locally unless `--server` names an htd-server instance to delegate to.
#[derive(Debug, Parser)]
#[command(name = "htd", version, propagate_version = true)]
pub struct Cli {
    /// Base URL of an htd-server to run the command on instead of locally.
    #[arg(long, global = true, value_name = "URL", env = "HTD_SERVER")]
    pub server: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a schedule at every epoch 0..=EPOCHS and write `t,lr` CSV.
    #[command(after_help = SCHEDULE_GRAMMAR)]
    Curve(CurveArgs),
    /// Print the decreasing ratio (1 - tanh(x + delta)) / (1 - tanh x).
    Ratio(RatioArgs),
    /// Sup-norm distance between two cosine/HTD schedules on a dense grid.
    #[command(after_help = SCHEDULE_GRAMMAR)]
    Diff(DiffArgs),
    /// Run one training experiment from a JSON config and write per-epoch metrics CSV.
    Train(RunArgs),
    /// Run a step-ratio or HTD R sweep from a JSON config and write the sweep CSV.
    Sweep(RunArgs),
}

const SCHEDULE_GRAMMAR: &str = "\
Compact schedule form <kind>:<params> (T comes from --epochs):
  step:START:RATE,START:RATE,...   0-based milestones, first START must be 0
  exp:LR0,LAMBDA
  two-stage:LR0,LAMBDA1,LAMBDA2,SWITCH_EPOCH
  cosine:LR_MIN,LR_MAX
  htd:L,U,LR_MIN,LR_MAX
  constant:RATE
A bare --schedule <kind> takes its parameters from the flags instead.";

/// Schedule selection, either a bare kind completed by the parameter flags or
/// the compact `<kind>:<params>` form.
#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Schedule kind (step, exp, two-stage, cosine, htd, constant) or compact `<kind>:<params>`.
    #[arg(long, value_name = "KIND[:PARAMS]")]
    pub schedule: String,

    /// HTD lower bound L (<= 0).
    #[arg(long = "L", value_name = "FLOAT", allow_negative_numbers = true)]
    pub lower: Option<f64>,

    /// HTD upper bound U (> 0).
    #[arg(long = "U", value_name = "FLOAT", allow_negative_numbers = true)]
    pub upper: Option<f64>,

    /// Minimum learning rate for cosine and HTD.
    #[arg(long, value_name = "FLOAT", default_value_t = 0.0)]
    pub lr_min: f64,

    /// Maximum learning rate for cosine and HTD.
    #[arg(long, value_name = "FLOAT", default_value_t = 0.1)]
    pub lr_max: f64,

    /// Initial rate for exp and two-stage.
    #[arg(long, value_name = "FLOAT", default_value_t = 0.1)]
    pub lr0: f64,

    /// Discount factor for exp, in [0, 1].
    #[arg(long, value_name = "FLOAT")]
    pub lambda: Option<f64>,

    /// First-stage discount factor for two-stage.
    #[arg(long, value_name = "FLOAT")]
    pub lambda1: Option<f64>,

    /// Second-stage discount factor for two-stage.
    #[arg(long, value_name = "FLOAT")]
    pub lambda2: Option<f64>,

    /// Epoch at which two-stage switches to lambda2.
    #[arg(long, value_name = "INT")]
    pub switch_epoch: Option<u32>,

    /// Step milestones as START:RATE pairs, 0-based, e.g. 0:0.1,81:0.01,122:0.001.
    #[arg(long, value_name = "START:RATE,...")]
    pub milestones: Option<String>,

    /// Rate of a constant schedule.
    #[arg(long, value_name = "FLOAT")]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,

    /// Horizon T (number of epochs).
    #[arg(long, value_name = "INT")]
    pub epochs: u32,

    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    /// Position x of the tanh argument.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub x: f64,

    /// Displacement delta (> 0).
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// First schedule, compact form, e.g. htd:-2,2,0,0.1.
    #[arg(long, value_name = "KIND:PARAMS")]
    pub a: String,

    /// Second schedule, compact form, e.g. cosine:0,0.1.
    #[arg(long, value_name = "KIND:PARAMS")]
    pub b: String,

    /// Horizon T shared by both schedules.
    #[arg(long, value_name = "INT")]
    pub epochs: u32,

    /// Number of equispaced progress points in [0, 1].
    #[arg(long, value_name = "INT", default_value_t = 10001)]
    pub grid: usize,

    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,

    /// Run seed; replaces the config's `seed` (the base seed for sweeps).
    #[arg(long, value_name = "U64")]
    pub seed: u64,

    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
