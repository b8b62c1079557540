//! Command-line driver for the transport solver: single solves, the alpha
//! sweep and mesh-study experiment protocols, histogram color transfer, and
//! the randomized LP equivalence suite.

mod commands;
mod config;
mod error;
mod manifest;
mod output;
mod parallel;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "buot",
    version,
    about = "Beckmann-form balanced and unbalanced optimal transport on grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one transport problem and write a summary record.
    Solve(commands::solve::SolveArgs),
    /// Sweep alpha, comparing each solution to a balanced reference solve.
    SweepAlpha(commands::sweep_alpha::SweepArgs),
    /// Tabulate the source norm across alphas and mesh sizes.
    MeshStudy(commands::mesh_study::MeshStudyArgs),
    /// Transfer chromaticity histograms between two images.
    ColorTransfer(commands::color_transfer::ColorTransferArgs),
    /// Run the randomized PDHG-versus-LP equivalence suite.
    OracleCheck(commands::oracle_check::OracleCheckArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(args) => commands::solve::run(args),
        Command::SweepAlpha(args) => commands::sweep_alpha::run(args),
        Command::MeshStudy(args) => commands::mesh_study::run(args),
        Command::ColorTransfer(args) => commands::color_transfer::run(args),
        Command::OracleCheck(args) => commands::oracle_check::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
