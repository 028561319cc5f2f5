use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cubicavoid_cli::{run_command, sweep_command, Flags, Mode};

#[derive(Parser)]
#[command(name = "cubicavoid", version, about = "Obstacle-avoiding cubics on Lie groups and their optimality check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the randomized shooting restarts.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every tolerance default.
    #[arg(long)]
    tol_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides the mode in the scenario file.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Re-run the check for each value of one scalar config field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path of the swept field, e.g. potential.params.tau.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, mode } => {
            let flags = Flags { mode: *mode, seed: common.seed, tol_scale: common.tol_scale };
            run_command(&common.config, &common.out, &flags)
        }
        Command::Sweep { common, param, values } => {
            let flags = Flags { mode: None, seed: common.seed, tol_scale: common.tol_scale };
            sweep_command(&common.config, param, values, &common.out, &flags)
        }
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
