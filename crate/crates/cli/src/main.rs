use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fence_sim::{cmd_check_gains, cmd_compare, cmd_run, cmd_verify, CliError, RunConfig};

/// Label-free moving-target fencing simulator.
#[derive(Parser)]
#[command(name = "fence-sim", version)]
struct Cli {
    /// Output directory; overrides `out` in the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario and write trajectory.csv and metrics.csv.
    Run { config: PathBuf },
    /// Print the gain conditions; exits 0 iff the fencing condition holds.
    CheckGains { config: PathBuf },
    /// Print the closed-loop analysis: Routh test, regulator solution, P.
    Verify { config: PathBuf },
    /// Run the label-free and label-fixed controllers from the same starts.
    Compare { config: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (Command::Run { config } | Command::CheckGains { config } | Command::Verify { config } | Command::Compare { config }) =
        &cli.command;
    let mut cfg = RunConfig::from_path(config)?;
    cfg.apply_env(|k| std::env::var(k).ok())?;
    let mut stdout = std::io::stdout().lock();
    let out = cli.out.as_deref();
    match cli.command {
        Command::Run { .. } => cmd_run(&cfg, out, &mut stdout),
        Command::CheckGains { .. } => cmd_check_gains(&cfg, &mut stdout),
        Command::Verify { .. } => cmd_verify(&cfg, &mut stdout),
        Command::Compare { .. } => cmd_compare(&cfg, out, &mut stdout),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fence-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
