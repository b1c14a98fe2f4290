//! Batch front end for the cespin toolkit.
//!
//! Every subcommand reads one plain-text config, writes provenance-headed
//! output and prints a short summary. Exit codes: 0 success, 1 invalid
//! input or configuration, 2 non-convergence, 3 I/O failure.

use std::path::PathBuf;

use cespin_cli::{commands, config};

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cespin",
    version,
    about = "Spin-resonance batch computations: spectra, pumping, coherence decays, fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resonance spectrum at a fixed field; prints the distinct lines
    Spectrum(RunArgs),
    /// Per-site transition frequencies over a field sweep
    Zeeman(RunArgs),
    /// Pulsed optical pumping trajectory
    Pump(RunArgs),
    /// Monte Carlo pulse-sequence signal under classical dephasing
    Simulate(RunArgs),
    /// Dipolar-coupled cluster signal under a pulse sequence
    Cluster(RunArgs),
    /// Fit a decay model to a signal CSV
    Fit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output path (CSV, or the fit report)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed key of the config
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the threads key of the config
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { 0 } else { 1 };
        }
    };
    let (name, args) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::Zeeman(a) => ("zeeman", a),
        Command::Pump(a) => ("pump", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Cluster(a) => ("cluster", a),
        Command::Fit(a) => ("fit", a),
    };
    match execute(name, args) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                cespin::Error::InvalidInput(_) | cespin::Error::Config(_) => 1,
                cespin::Error::NonConvergence(_) => 2,
                cespin::Error::Io(_) => 3,
            }
        }
    }
}

fn execute(name: &str, args: &RunArgs) -> cespin::Result<String> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = config::RunConfig::parse(&text)?;
    commands::run(name, &mut cfg, args.out.as_deref(), args.seed, args.threads)
}
