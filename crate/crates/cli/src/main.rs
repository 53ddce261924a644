//! `clockmem`: memory-time experiments for the 2D clock and XY models.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::Command;

#[derive(Debug, Parser)]
#[command(name = "clockmem", version, about = "Memory time of the polarized 2D clock/XY model under Metropolis dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clockmem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
