//! `prtspace`: validate models, check reachability bounds, sweep delay
//! densities, simulate the moving-robot scenario and look for collisions.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use manifest::{write_manifest, Run};

#[derive(Parser)]
#[command(
    name = "prtspace",
    version,
    about = "Probabilistic real-time models: checking, simulation and spatial analysis"
)]
struct Cli {
    /// Round probabilities and speeds to N digits after the point.
    #[arg(long, global = true, value_name = "N")]
    digits: Option<u32>,
    /// Worker threads for sweeps. Output order does not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    jobs: usize,
    /// Where the run manifest is written.
    #[arg(long, global = true, default_value = "prtspace-manifest.json", value_name = "PATH")]
    manifest: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Max,
    Min,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EntityArg {
    Robot,
    Human,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and resolve a model; diagnostics go to standard error.
    Validate { model: PathBuf },
    /// Time-bounded reachability probability.
    Check {
        model: PathBuf,
        /// A query declared in the model.
        #[arg(long, conflicts_with = "target")]
        query: Option<String>,
        /// Target expression; defaults to the network target.
        #[arg(long)]
        target: Option<String>,
        /// Time bound in seconds; overrides the query's bound.
        #[arg(long, value_name = "SECONDS")]
        bound: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Cumulative probability and per-bin mass on a regular grid, as CSV.
    Density {
        model: PathBuf,
        #[arg(long, conflicts_with = "target")]
        query: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value = "0.02", value_name = "SECONDS")]
        bin: String,
        #[arg(long, default_value = "0.5", value_name = "SECONDS")]
        upto: String,
        #[arg(long, value_enum, default_value = "max")]
        mode: ModeArg,
        /// Write the CSV here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the kinematic scenario for one reaction delay or a sweep.
    Simulate {
        /// Model whose `scenario` block configures the run; defaults apply otherwise.
        model: Option<PathBuf>,
        #[arg(long, value_name = "SECONDS", required_unless_present = "sweep", conflicts_with = "sweep")]
        delay: Option<String>,
        /// Comma-separated ascending delays in seconds.
        #[arg(long, value_name = "LIST")]
        sweep: Option<String>,
        /// Trace CSV for a single run, or a directory of traces for a sweep.
        #[arg(long, value_name = "OUT")]
        trace: Option<PathBuf>,
        /// Leave the hall empty.
        #[arg(long)]
        no_human: bool,
    },
    /// Collisions between the robot and the human in a trace.
    Spatial {
        trace: PathBuf,
        /// Drop events whose joint probability is below this.
        #[arg(long, default_value_t = 0.0, value_name = "EPS")]
        threshold: f64,
        /// Directory for `robot.bsd` and `human.bsd`.
        #[arg(long, value_name = "DIR")]
        bespaced: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0, value_name = "P")]
        robot_probability: f64,
        #[arg(long, default_value_t = 1.0, value_name = "P")]
        human_probability: f64,
    },
    /// Write the model's network in PRISM's PTA language.
    ExportPrism {
        model: PathBuf,
        /// Output file, or `-` for standard output.
        out: PathBuf,
        /// Write probabilities as numbers instead of constant expressions.
        #[arg(long)]
        numeric: bool,
    },
    /// Write occupancy specs from a trace in BeSpaceD-style text.
    ExportBespaced {
        trace: PathBuf,
        /// Output directory.
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        entity: EntityArg,
        #[arg(long, default_value_t = 1.0, value_name = "P")]
        robot_probability: f64,
        #[arg(long, default_value_t = 1.0, value_name = "P")]
        human_probability: f64,
    },
}

pub enum Failure {
    /// Bad flags or arguments.
    Usage(String),
    Io(String),
    /// The input was read but is invalid, or a check could not be carried out.
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) | Failure::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Domain(m) => m,
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Check { .. } => "check",
        Command::Density { .. } => "density",
        Command::Simulate { .. } => "simulate",
        Command::Spatial { .. } => "spatial",
        Command::ExportPrism { .. } => "export-prism",
        Command::ExportBespaced { .. } => "export-bespaced",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let arguments = std::env::args().skip(1).collect();
    let mut run = Run::new(command_name(&cli.command), arguments, cli.digits, cli.jobs);
    let outcome = if cli.jobs == 0 {
        Err(Failure::Usage("--jobs must be at least 1".into()))
    } else {
        dispatch(cli.command, &mut run)
    };
    let (code, error) = match &outcome {
        Ok(()) => (0, None),
        Err(f) => {
            if !f.message().is_empty() {
                eprintln!("prtspace: {}", f.message());
            }
            (f.code(), Some(f.message()))
        }
    };
    let manifest = run.finish(code, error);
    if let Err(e) = write_manifest(&cli.manifest, &manifest) {
        eprintln!("prtspace: cannot write manifest {}: {e}", cli.manifest.display());
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

fn dispatch(command: Command, run: &mut Run) -> Result<(), Failure> {
    match command {
        Command::Validate { model } => commands::validate(run, &model),
        Command::Check { model, query, target, bound, mode } => {
            commands::check(run, &model, query.as_deref(), target.as_deref(), bound.as_deref(), mode)
        }
        Command::Density { model, query, target, bin, upto, mode, output } => {
            commands::density(run, &model, query.as_deref(), target.as_deref(), &bin, &upto, mode, output.as_deref())
        }
        Command::Simulate { model, delay, sweep, trace, no_human } => {
            commands::simulate(run, model.as_deref(), delay.as_deref(), sweep.as_deref(), trace.as_deref(), no_human)
        }
        Command::Spatial { trace, threshold, bespaced, robot_probability, human_probability } => {
            commands::spatial(run, &trace, threshold, bespaced.as_deref(), robot_probability, human_probability)
        }
        Command::ExportPrism { model, out, numeric } => commands::export_prism(run, &model, &out, numeric),
        Command::ExportBespaced { trace, out, entity, robot_probability, human_probability } => {
            commands::export_bespaced(run, &trace, &out, entity, robot_probability, human_probability)
        }
    }
}
