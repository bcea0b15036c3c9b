//! `hpspec`: command-line driver for decomposition, norms, simulation,
//! verification and sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpspec::run::{exit_code_for, run, Command, RunConfig, RunOptions, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "hpspec", version, about = "Spectral toolkit for partially diffusive hyperbolic systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Littlewood-Paley blocks of the configured data
    Decompose(Common),
    /// Besov norm of the configured data
    Norm(Common),
    /// Subcritical iteration
    Simulate(Common),
    /// Critical-regularity iteration
    SolveCritical(Common),
    /// Inequality checks
    Verify(Common),
    /// Parameter sweep
    Sweep(Common),
    /// Whatever command the config names
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config)
    #[arg(long, env = "HPSPEC_OUT")]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, env = "HPSPEC_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Decompose(a) => (Some(Command::Decompose), a),
        Cmd::Norm(a) => (Some(Command::Norm), a),
        Cmd::Simulate(a) => (Some(Command::Simulate), a),
        Cmd::SolveCritical(a) => (Some(Command::SolveCritical), a),
        Cmd::Verify(a) => (Some(Command::Verify), a),
        Cmd::Sweep(a) => (Some(Command::Sweep), a),
        Cmd::Run(a) => (None, a),
    };
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(c) = command {
        cfg.command = c;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let opts = RunOptions { out: args.out, threads: args.threads };
    match run(&cfg, &opts) {
        Ok(outcome) => {
            if !args.quiet {
                for line in &outcome.summary {
                    println!("{line}");
                }
                println!("output: {}", outcome.out_dir.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
