//! Experiment harness around `lrp-core`: a rayon executor, TOML experiment
//! configs, plain-text configuration files, CSV/JSON result files and the
//! subcommands of the `lrp` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod format;
pub mod output;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

pub use commands::{Context, Outcome};
pub use config::{Command, ExperimentConfig};
pub use error::{exit, LabError, LabResult};

/// Command-line options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    /// Replaces `run.master_seed`.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Base directory; the run gets its own subdirectory.
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub outcome: Outcome,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.outcome.violated > 0 {
            exit::VIOLATED
        } else {
            exit::OK
        }
    }
}

/// Loads and validates the config, runs `command` and writes the manifest.
pub fn execute(command: Command, opts: &RunOptions) -> LabResult<RunSummary> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.run.master_seed = seed;
    }
    config.validate(command)?;
    let base = opts.out.clone().or_else(|| config.run.output_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    let exec = exec::RayonExecutor::new(opts.workers.unwrap_or(0))?;
    let mut dir = output::RunDir::create(&base, &output::run_dir_name(command, &config))?;
    let start = Instant::now();
    let mut ctx = Context::new(&config, &exec, &mut dir);
    let outcome = commands::run(command, &mut ctx)?;
    let seeds = ctx.seeds_json();
    dir.write_manifest(command, &config, &seeds, exec.workers(), start.elapsed().as_secs_f64())?;
    Ok(RunSummary { dir: dir.path().to_path_buf(), outcome })
}
