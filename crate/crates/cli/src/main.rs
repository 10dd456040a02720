use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use livsic_cli::{run, AnalysisConfig, Command, Scenario};

#[derive(Parser)]
#[command(name = "livsic", version, about = "Livšic analysis of interval maps with a neutral fixed point")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report.json and CSV files [default: livsic-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Do not print the verdict.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the Gibbs–Markov axioms and the Doeblin–Fortet inequality.
    Axioms,
    /// Build the first-return partition and the tower.
    Induce,
    /// Evaluate periodic orbit obstructions.
    Livsic,
    /// Reconstruct the transfer function along an orbit.
    Solve,
    /// Test the obstructions for a lattice reduction.
    Aperiodicity,
    /// Estimate the CLT variance.
    Variance,
    /// Run a builtin end-to-end scenario.
    Scenario {
        /// corollary-1, corollary-2, theorem-2-regularity or variance-positivity.
        name: Scenario,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (AnalysisConfig::load(path)?, base)
        }
        None => (AnalysisConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let out = cli.out.clone().or_else(|| cfg.run.out.clone()).unwrap_or_else(|| PathBuf::from("livsic-out"));
    let command = match cli.command {
        Sub::Axioms => Command::Axioms,
        Sub::Induce => Command::Induce,
        Sub::Livsic => Command::Livsic,
        Sub::Solve => Command::Solve,
        Sub::Aperiodicity => Command::Aperiodicity,
        Sub::Variance => Command::Variance,
        Sub::Scenario { name } => Command::Scenario(name),
    };
    let report = run(command, cfg, &base)?;
    report.write(&out)?;
    if !cli.quiet {
        println!("{}", report.verdict);
    }
    Ok(())
}
