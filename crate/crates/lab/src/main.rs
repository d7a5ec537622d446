use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrp_lab::{execute, exit, Command, RunOptions};

#[derive(Parser)]
#[command(name = "lrp", version, about = "Long-range percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides run.master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Base output directory (default: run.output_dir, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample one configuration and write it with its cluster sizes.
    Sample(Common),
    /// Two-point function table per box.
    #[command(name = "twopoint")]
    TwoPoint(Common),
    /// Cluster-size tail P(|K_0| >= m) and |K_max| histograms.
    Tail(Common),
    /// phi profile over k for one or more beta.
    PhiScan(Common),
    /// Bracket the critical point.
    Betac(Common),
    /// Exact expected boundary edge counts.
    Isoperimetry(Common),
    /// Exponent fits and inequality checks around the critical point.
    Exponents(Common),
    /// Tightness, quantile and moment inequality checks.
    Tightness(Common),
    /// Compare Monte Carlo estimates with exact enumeration.
    OracleCheck(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Sample(c) => (Command::Sample, c),
        Cmd::TwoPoint(c) => (Command::TwoPoint, c),
        Cmd::Tail(c) => (Command::Tail, c),
        Cmd::PhiScan(c) => (Command::PhiScan, c),
        Cmd::Betac(c) => (Command::Betac, c),
        Cmd::Isoperimetry(c) => (Command::Isoperimetry, c),
        Cmd::Exponents(c) => (Command::Exponents, c),
        Cmd::Tightness(c) => (Command::Tightness, c),
        Cmd::OracleCheck(c) => (Command::OracleCheck, c),
    };
    let opts = RunOptions { config: common.config, seed: common.seed, workers: common.workers, out: common.out };
    let code = match execute(command, &opts) {
        Ok(summary) => {
            println!("{}", summary.dir.display());
            if summary.outcome.violated > 0 {
                eprintln!("lrp: {} check(s) violated", summary.outcome.violated);
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("lrp: {e}");
            e.exit_code()
        }
    };
    debug_assert!([exit::OK, exit::CONFIG, exit::PRECONDITION, exit::VIOLATED, exit::INTERNAL].contains(&code));
    ExitCode::from(code as u8)
}
