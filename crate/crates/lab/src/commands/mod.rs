//! The `lrp` subcommands. Each writes its data files into the run directory
//! and reports how many inequality checks came out `violated`.

mod betac;
mod exponents;
mod isoperimetry;
mod oracle_check;
mod sampling;
mod tightness;

pub use oracle_check::{compare_with_oracle, oracle_grid, Comparison, OracleRun};

use lrp_core::analysis::{InequalityReport, Verdict};
use serde_json::{Map, Value};

use crate::config::{Command, ExperimentConfig};
use crate::error::LabResult;
use crate::exec::RayonExecutor;
use crate::output::RunDir;

/// Progress lines go to stderr; result data only ever goes to files.
macro_rules! progress {
    ($($arg:tt)*) => { eprintln!("lrp: {}", format!($($arg)*)) };
}
pub(crate) use progress;

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub exec: &'a RayonExecutor,
    pub out: &'a mut RunDir,
    seeds: Map<String, Value>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a ExperimentConfig, exec: &'a RayonExecutor, out: &'a mut RunDir) -> Self {
        let mut seeds = Map::new();
        seeds.insert("master".into(), config.run.master_seed.into());
        Self { config, exec, out, seeds }
    }

    pub fn seed(&self) -> u64 {
        self.config.run.master_seed
    }

    pub fn record_seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.into(), seed.into());
    }

    pub fn seeds_json(&self) -> Value {
        Value::Object(self.seeds.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    /// Number of `violated` verdicts (or failed comparisons for `oracle-check`).
    pub violated: usize,
    pub inconclusive: usize,
}

impl Outcome {
    pub fn from_reports(reports: &[InequalityReport]) -> Self {
        Self { violated: reports.iter().filter(|r| r.verdict == Verdict::Violated).count(), inconclusive: reports.iter().filter(|r| r.verdict == Verdict::Inconclusive).count() }
    }
}

pub fn run(command: Command, ctx: &mut Context<'_>) -> LabResult<Outcome> {
    match command {
        Command::Sample => sampling::sample(ctx),
        Command::TwoPoint => sampling::two_point(ctx),
        Command::Tail => sampling::tail(ctx),
        Command::PhiScan => sampling::phi_scan(ctx),
        Command::Betac => betac::betac(ctx),
        Command::Isoperimetry => isoperimetry::isoperimetry(ctx),
        Command::Exponents => exponents::exponents(ctx),
        Command::Tightness => tightness::tightness(ctx),
        Command::OracleCheck => oracle_check::oracle_check(ctx),
    }
}

/// Sorted, de-duplicated box radii from the config.
pub(crate) fn sorted_boxes(config: &ExperimentConfig) -> Vec<u32> {
    let mut b = config.run.boxes.clone();
    b.sort_unstable();
    b.dedup();
    b
}
