//! Command-line entry point.
//!
//! Exit codes: 0 when every check passes, 2 when any scientific verdict
//! fails, 1 on configuration or execution errors.

mod checks;
mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sbm-lab",
    version,
    about = "Numerical laboratory for the density of one-dimensional super-Brownian motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks configured in an experiment file
    Run {
        /// Path to the experiment config
        #[arg(long)]
        config: PathBuf,
        /// Write per-replica t,x,u field dumps (large)
        #[arg(long)]
        dump_fields: bool,
        /// Override the configured replica count
        #[arg(long)]
        replicas: Option<usize>,
        /// Override the configured master seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List every registered check with its anchor
    ListChecks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            dump_fields,
            replicas,
            seed,
        } => {
            let flags = runner::RunFlags {
                dump_fields,
                replicas,
                seed,
            };
            match runner::run(&config, &flags) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(2),
                Err(err) => {
                    eprintln!("error: {err:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::ListChecks => {
            let defs = checks::registry();
            for def in defs {
                println!(
                    "{} \u{2192} {} \u{2014} {}",
                    def.name, def.anchor, def.summary
                );
            }
            println!("total: {} checks", defs.len());
            ExitCode::SUCCESS
        }
    }
}
