//! `tpp`: modeling, calibration, and drive planning for thermopneumatic
//! tactile pixels.

mod commands;
mod config;
mod util;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{analyze, calibrate, envelope, intensity, schedule, simulate};
use config::ProjectConfig;
use util::CliResult;

#[derive(Parser)]
#[command(
    name = "tpp",
    version,
    about = "Thermopneumatic pixel toolkit: simulate, calibrate, plan safe drive schedules"
)]
struct Cli {
    /// Config TOML path (defaults are built in).
    #[arg(long, global = true, env = "TPP_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory (default: config output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the active configuration as TOML.
    Config,
    /// Simulate a single electrical pulse through the full chain.
    Simulate(simulate::SimulateArgs),
    /// Operating-envelope tables and fits.
    Envelope {
        #[command(subcommand)]
        cmd: envelope::EnvelopeCmd,
    },
    /// Extract model parameters from measurement traces.
    Calibrate {
        #[command(subcommand)]
        cmd: calibrate::CalibrateCmd,
    },
    /// Reduce measured or simulated traces.
    Analyze {
        #[command(subcommand)]
        cmd: analyze::AnalyzeCmd,
    },
    /// Compile a pattern file into a safety-gated gate-event timeline.
    Schedule(schedule::ScheduleArgs),
    /// Intensity-power mapping and perceptual statistics.
    Intensity {
        #[command(subcommand)]
        cmd: intensity::IntensityCmd,
    },
}

fn run(cli: Cli) -> CliResult {
    let config = ProjectConfig::load(cli.config.as_deref())?;
    let out_dir = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
    match &cli.command {
        Command::Config => {
            print!("{}", config.to_toml()?);
            Ok(())
        }
        Command::Simulate(args) => simulate::run(&config, &out_dir, args),
        Command::Envelope { cmd } => envelope::run(&config, &out_dir, cmd),
        Command::Calibrate { cmd } => calibrate::run(&config, &out_dir, cmd),
        Command::Analyze { cmd } => analyze::run(&config, &out_dir, cmd),
        Command::Schedule(args) => schedule::run(&config, &out_dir, args),
        Command::Intensity { cmd } => intensity::run(&config, &out_dir, cmd),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code());
    }
}
