mod args;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use args::{Cli, Command, CurveArgs, DiffArgs, RatioArgs, RunArgs, ScheduleArgs};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use htd_client::Client;
use htd_core::analysis::{self, ProximityReport, RatioQuery};
use htd_core::harness::{self, ExperimentConfig, SweepConfig};
use htd_core::schedule::{parse_milestones, ScheduleSpec};

/// Where commands execute.
enum Backend {
    Local,
    Remote {
        client: Client,
        runtime: tokio::runtime::Runtime,
    },
}

impl Backend {
    fn new(server: Option<&str>) -> Result<Self> {
        Ok(match server {
            None => Backend::Local,
            Some(url) => Backend::Remote {
                client: Client::new(url)?,
                runtime: tokio::runtime::Runtime::new().context("starting async runtime")?,
            },
        })
    }
}

/// A usage problem found after clap parsing; reported with exit code 2.
fn usage(kind: ErrorKind, message: impl std::fmt::Display) -> ! {
    let mut cmd = Cli::command();
    let sub = std::env::args()
        .skip(1)
        .find(|a| cmd.find_subcommand(a).is_some());
    match sub.and_then(|name| cmd.find_subcommand_mut(&name).cloned()) {
        Some(mut sub_cmd) => {
            let name = format!("htd {}", sub_cmd.get_name());
            sub_cmd = sub_cmd.bin_name(name);
            sub_cmd.error(kind, message).exit()
        }
        None => cmd.error(kind, message).exit(),
    }
}

fn schedule_from_flags(args: &ScheduleArgs, epochs: u32) -> ScheduleSpec {
    let invalid = |flag: &str, err: htd_core::Error| -> ! {
        usage(
            ErrorKind::ValueValidation,
            format!("invalid value for {flag}: {err}"),
        )
    };
    if args.schedule.contains(':') {
        return ScheduleSpec::parse(&args.schedule, epochs)
            .unwrap_or_else(|e| invalid("--schedule", e));
    }
    let need = |value: Option<f64>, flag: &str| -> f64 {
        value.unwrap_or_else(|| {
            usage(
                ErrorKind::MissingRequiredArgument,
                format!("{flag} is required for --schedule {}", args.schedule),
            )
        })
    };
    let spec = match args.schedule.to_ascii_lowercase().as_str() {
        "htd" => ScheduleSpec::htd(
            need(args.lower, "--L"),
            need(args.upper, "--U"),
            args.lr_min,
            args.lr_max,
            epochs,
        ),
        "cosine" | "cos" => ScheduleSpec::cosine(args.lr_min, args.lr_max, epochs),
        "exp" | "exponential" => ScheduleSpec::exponential(args.lr0, need(args.lambda, "--lambda")),
        "two-stage" | "two_stage" => {
            let switch = args.switch_epoch.unwrap_or_else(|| {
                usage(
                    ErrorKind::MissingRequiredArgument,
                    "--switch-epoch is required for --schedule two-stage",
                )
            });
            ScheduleSpec::two_stage(
                args.lr0,
                need(args.lambda1, "--lambda1"),
                need(args.lambda2, "--lambda2"),
                switch,
            )
        }
        "step" | "step_decay" => {
            let text = args.milestones.as_deref().unwrap_or_else(|| {
                usage(
                    ErrorKind::MissingRequiredArgument,
                    "--milestones is required for --schedule step",
                )
            });
            let milestones = parse_milestones(text).unwrap_or_else(|e| invalid("--milestones", e));
            ScheduleSpec::step_decay(&milestones)
        }
        "constant" | "const" => ScheduleSpec::constant(need(args.rate, "--rate")),
        other => usage(
            ErrorKind::InvalidValue,
            format!("unknown --schedule kind `{other}`"),
        ),
    };
    spec.unwrap_or_else(|e| invalid("--schedule", e))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn curve(backend: &Backend, args: &CurveArgs) -> Result<()> {
    let spec = schedule_from_flags(&args.schedule, args.epochs);
    let csv = match backend {
        Backend::Local => spec.curve(args.epochs)?.to_csv(),
        Backend::Remote { client, runtime } => {
            runtime.block_on(client.curve_csv(&spec, args.epochs))?
        }
    };
    write_output(args.out.as_deref(), &csv)
}

fn ratio(backend: &Backend, args: &RatioArgs) -> Result<()> {
    let query = RatioQuery::new(args.x, args.delta).unwrap_or_else(|e| {
        usage(
            ErrorKind::ValueValidation,
            format!("invalid --x/--delta: {e}"),
        )
    });
    let value = match backend {
        Backend::Local => analysis::decreasing_ratio(query),
        Backend::Remote { client, runtime } => {
            runtime.block_on(client.ratio(query.x, query.delta))?.ratio
        }
    };
    write_output(None, &format!("{value}\n"))
}

fn diff(backend: &Backend, args: &DiffArgs) -> Result<()> {
    let parse = |flag: &str, text: &str| {
        ScheduleSpec::parse(text, args.epochs).unwrap_or_else(|e| {
            usage(
                ErrorKind::ValueValidation,
                format!("invalid value for {flag}: {e}"),
            )
        })
    };
    let a = parse("--a", &args.a);
    let b = parse("--b", &args.b);
    let csv = match backend {
        Backend::Local => {
            let report = analysis::sup_difference(&a, &b, args.grid)?;
            format!("{}\n{}\n", ProximityReport::CSV_HEADER, report.csv_row())
        }
        Backend::Remote { client, runtime } => {
            runtime.block_on(client.diff_csv(&a, &b, args.grid))?
        }
    };
    write_output(args.out.as_deref(), &csv)
}

fn train(backend: &Backend, args: &RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.seed = args.seed;
    let csv = match backend {
        Backend::Local => harness::metrics_csv(&harness::run_experiment(&cfg)?),
        Backend::Remote { client, runtime } => runtime.block_on(client.train_csv(&cfg))?,
    };
    write_output(args.out.as_deref(), &csv)
}

fn sweep(backend: &Backend, args: &RunArgs) -> Result<()> {
    let mut cfg = SweepConfig::load(&args.config)?;
    cfg.base.seed = args.seed;
    let csv = match backend {
        Backend::Local => harness::sweep_csv(&harness::run_sweep(&cfg)?),
        Backend::Remote { client, runtime } => runtime.block_on(client.sweep_csv(&cfg))?,
    };
    write_output(args.out.as_deref(), &csv)
}

fn run(cli: &Cli) -> Result<()> {
    let backend = Backend::new(cli.server.as_deref())?;
    match &cli.command {
        Command::Curve(args) => curve(&backend, args),
        Command::Ratio(args) => ratio(&backend, args),
        Command::Diff(args) => diff(&backend, args),
        Command::Train(args) => train(&backend, args),
        Command::Sweep(args) => sweep(&backend, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
