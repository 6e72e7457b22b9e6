//! `caos`: run spectrometer simulations from experiment files or presets.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "caos", version, about = "Coded-access spectrometer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Sylvester Walsh codebook as a ±1 CSV matrix.
    Codebook {
        /// Matrix order, a power of two.
        #[arg(long)]
        order: usize,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Acquire the configured sample and its reference, then normalize.
    Simulate(RunArgs),
    /// Sweep neutral-density attenuation and report the dynamic range.
    SweepDr(RunArgs),
    /// Find the noise density that puts the FM-TDMA threshold at a given power.
    CalibrateNoise {
        #[command(flatten)]
        run: RunArgs,
        /// Optical power at the threshold, W.
        #[arg(long, default_value_t = 10.1e-12)]
        target_power: f64,
        #[arg(long, default_value_t = 1.2)]
        target_snr: f64,
    },
    /// Acquire the bare source (system response).
    Response(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment file or bundled preset name.
    #[arg(long)]
    config: String,
    /// Output directory; defaults to the one in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for every trial.
    #[arg(long)]
    seed: Option<u64>,
    /// Run at the full-scale sample rate.
    #[arg(long)]
    full_scale: bool,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Codebook { order, out } => commands::codebook(order, &out),
        Command::Simulate(a) => commands::simulate(&a.into()),
        Command::SweepDr(a) => commands::sweep_dr(&a.into()),
        Command::CalibrateNoise {
            run,
            target_power,
            target_snr,
        } => commands::calibrate_noise(&run.into(), target_power, target_snr),
        Command::Response(a) => commands::response(&a.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}

impl From<RunArgs> for commands::Run {
    fn from(a: RunArgs) -> Self {
        commands::Run {
            config: a.config,
            out: a.out,
            seed: a.seed,
            full_scale: a.full_scale,
            trials: a.trials,
        }
    }
}
