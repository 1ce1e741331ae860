//! `cdro` — sensitivity of worst-case values under adapted-transport model
//! ambiguity: discrete and continuous-time estimators, analytic reference
//! targets and a brute-force verification oracle.

mod commands;
mod config;
mod expr;

use clap::{Parser, Subcommand};
use commands::{CliError, OracleCmd, ReproTarget, SensCmd};
use config::Manifest;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cdro", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First-order sensitivity estimators
    Sens {
        #[command(subcommand)]
        which: SensCmd,
    },
    /// Reproduce the analytic reference values and the strike sweep
    Repro {
        #[arg(value_enum)]
        target: ReproTarget,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force verification of the first-order expansion
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
    /// Re-run the command recorded in a manifest
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Override the recorded output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Sens { which } => commands::cmd_sens(which),
        Command::Repro { target, out } => commands::cmd_repro(*target, out),
        Command::Oracle { which } => match which {
            OracleCmd::Check(args) => commands::cmd_oracle(args),
        },
        Command::Rerun { manifest, out } => {
            let m = Manifest::read(manifest).map_err(CliError::from)?;
            let mut argv: Vec<String> = vec!["cdro".into()];
            argv.extend(m.command.iter().cloned());
            if let Some(dir) = out {
                argv.push("--out".into());
                argv.push(dir.display().to_string());
            }
            let replay = Cli::try_parse_from(&argv).map_err(|e| CliError {
                code: 2,
                message: format!("manifest does not parse: {e}"),
            })?;
            dispatch(&replay.cmd)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
