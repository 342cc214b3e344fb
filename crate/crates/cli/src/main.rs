//! `uoht`: exponents, bounds, exact error oracles, simulations and
//! detection from the command line.
//!
//! Data goes to stdout (JSON for single results, CSV for sweeps) and
//! diagnostics to stderr. Exit codes: 0 success, 2 invalid input,
//! 3 solver non-convergence, 4 resource cap exceeded.

mod args;
mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "uoht",
    version,
    about = "Universal outlier hypothesis testing experiments"
)]
struct Cli {
    /// Worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true, env = "UOHT_THREADS")]
    threads: Option<usize>,

    /// Write results to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Error exponent of a test under known or unknown laws.
    Exponent(commands::ExponentArgs),
    /// KL-ball lower bound on a universal exponent.
    Bound(commands::BoundArgs),
    /// Lower-bound curves over the number of coordinates, as CSV.
    Figure(commands::FigureArgs),
    /// Exact error probabilities by type enumeration, as CSV or JSON.
    Oracle(commands::OracleArgs),
    /// Monte Carlo error sweep from a JSON config, as CSV or JSON.
    Simulate(commands::SimulateArgs),
    /// Run a detector on an observation file.
    Detect(commands::DetectArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<uoht::Error>() {
        Some(uoht::Error::NonConvergence { .. }) => 3,
        Some(uoht::Error::CapExceeded { .. }) => 4,
        _ => 2,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(uoht::Error::InvalidParameter("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }
    let mut out: Box<dyn Write> = match &cli.output {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(uoht::Error::from)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match &cli.command {
        Command::Exponent(a) => commands::exponent(a, &mut out)?,
        Command::Bound(a) => commands::bound(a, &mut out)?,
        Command::Figure(a) => commands::figure(a, &mut out)?,
        Command::Oracle(a) => commands::oracle(a, &mut out)?,
        Command::Simulate(a) => commands::simulate(a, &mut out)?,
        Command::Detect(a) => commands::detect(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
