//! Bracketing `beta_c` by bisection on `min_{1<=k<=n} phi_hat(Lambda_k)`.
//!
//! For `beta >= beta_c` every `phi_beta(Lambda_k)` is at least 1, and the
//! converse holds as well, so the minimum over `k` crossing 1 locates `beta_c`
//! up to finite-size and Monte Carlo error. The result is always a bracket.

use alloc::format;
use alloc::vec::Vec;

use crate::clusters::sample_cluster_sizes;
use crate::exec::Executor;
use crate::kernel::{KernelSpec, LatticeBox};
use crate::observables::{phi_profile_with, ExteriorTable};
use crate::stats::{DefinitionTag, ObservableEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    /// `min_k phi_hat(Lambda_k)` against 1.
    PhiCriterion,
    /// `P(|K_max(Lambda_n)| >= eps |Lambda_n|)` against a fixed level.
    CrossingFraction,
}

impl IndicatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PhiCriterion => "phi-criterion",
            Self::CrossingFraction => "crossing-fraction",
        }
    }
}

/// `min_{1<=k<=n} phi_hat(Lambda_k)` on configurations of `Lambda_n`.
pub fn phi_indicator<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, n: u32, replicas: u64, master_seed: u64) -> Result<ObservableEstimate> {
    let lattice = LatticeBox::new(spec.d, n)?;
    if n == 0 {
        return Err(Error::RadiusOutOfRange { k: 0, n });
    }
    let table = ExteriorTable::new(spec, lattice)?;
    Ok(phi_profile_with(exec, spec, lattice, n, &table, replicas, master_seed, false)?.minimum)
}

/// `P(|K_max(Lambda_n)| >= eps |Lambda_n|)`.
pub fn crossing_fraction<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, n: u32, eps: f64, replicas: u64, master_seed: u64) -> Result<ObservableEstimate> {
    let lattice = LatticeBox::new(spec.d, n)?;
    let sample = sample_cluster_sizes(exec, spec, lattice, 0..replicas, master_seed)?;
    let threshold = libm::ceil(eps * lattice.len() as f64).max(1.0) as u64;
    Ok(ObservableEstimate::from_counts(DefinitionTag::CrossingFraction, sample.largest.count_at_least(threshold), replicas))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOptions {
    pub n: u32,
    pub beta_low: f64,
    pub beta_high: f64,
    pub tolerance: f64,
    pub replicas: u64,
    /// Replicas double near the crossing until this cap.
    pub max_replicas: u64,
    /// Also bisect at `2n` and widen the bracket by the drift between the two.
    pub two_sizes: bool,
}

impl BisectionOptions {
    pub fn new(n: u32, beta_low: f64, beta_high: f64, tolerance: f64, replicas: u64) -> Self {
        Self { n, beta_low, beta_high, tolerance, replicas, max_replicas: replicas * 8, two_sizes: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub n: u32,
    pub beta: f64,
    pub indicator: f64,
    pub std_error: f64,
    pub replicas: u64,
    /// The indicator stayed within `2 sigma` of 1 at the replica cap; the
    /// bracket was shrunk around the midpoint instead of moving one end.
    pub uncertain: bool,
    /// Bracket after this step.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBracket {
    pub n: u32,
    pub beta_low: f64,
    pub beta_high: f64,
    pub max_replicas_used: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalEstimate {
    /// Union of the per-box brackets.
    pub beta_low: f64,
    pub beta_high: f64,
    pub indicator: IndicatorKind,
    pub boxes: Vec<BoxBracket>,
    /// Distance between bracket midpoints at `n` and `2n`.
    pub drift: f64,
    pub steps: Vec<StepRecord>,
}

impl CriticalEstimate {
    pub fn boxes_used(&self) -> Vec<u32> {
        self.boxes.iter().map(|b| b.n).collect()
    }
}

/// Indicator evaluation with geometric replica growth near 1.
fn evaluate<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, n: u32, beta: f64, opts: &BisectionOptions, seed: u64) -> Result<(ObservableEstimate, bool)> {
    let s = spec.with_beta(beta);
    let mut replicas = opts.replicas;
    loop {
        let est = phi_indicator(exec, &s, n, replicas, seed)?;
        let decided = libm::fabs(est.mean - 1.0) >= 2.0 * est.std_error;
        if decided || replicas * 2 > opts.max_replicas {
            return Ok((est, !decided));
        }
        replicas *= 2;
    }
}

/// Bisects on the phi criterion at `n` (and `2n`); the model's own `beta` is ignored.
pub fn bisect_beta_c<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, opts: &BisectionOptions, master_seed: u64) -> Result<CriticalEstimate> {
    spec.require_finite_critical_point()?;
    if !(opts.beta_low >= 0.0 && opts.beta_low < opts.beta_high && opts.beta_high.is_finite()) {
        return Err(Error::InvalidBracket(format!("need 0 <= beta_low < beta_high, got [{}, {}]", opts.beta_low, opts.beta_high)));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidBracket(format!("tolerance must be positive, got {}", opts.tolerance)));
    }
    if opts.n == 0 || opts.replicas < 2 {
        return Err(Error::Precondition("bisection needs n >= 1 and at least two replicas".into()));
    }
    let sizes: Vec<u32> = if opts.two_sizes { alloc::vec![opts.n, opts.n * 2] } else { alloc::vec![opts.n] };
    let mut steps = Vec::new();
    let mut boxes = Vec::new();
    for &n in &sizes {
        let (mut lo, mut hi) = (opts.beta_low, opts.beta_high);
        let mut max_used = opts.replicas;
        for (beta, below) in [(lo, true), (hi, false)] {
            let (est, uncertain) = evaluate(exec, spec, n, beta, opts, master_seed)?;
            max_used = max_used.max(est.replicas);
            steps.push(StepRecord { n, beta, indicator: est.mean, std_error: est.std_error, replicas: est.replicas, uncertain, bracket: (lo, hi) });
            if below && est.mean > 1.0 + 3.0 * est.std_error {
                return Err(Error::InvalidBracket(format!("indicator at beta_low = {beta} is {:.4} +- {:.4}, above 1 by more than 3 sigma (n = {n})", est.mean, est.std_error)));
            }
            if !below && est.mean < 1.0 - 3.0 * est.std_error {
                return Err(Error::InvalidBracket(format!("indicator at beta_high = {beta} is {:.4} +- {:.4}, below 1 by more than 3 sigma (n = {n})", est.mean, est.std_error)));
            }
        }
        while hi - lo >= opts.tolerance {
            let mid = 0.5 * (lo + hi);
            let (est, uncertain) = evaluate(exec, spec, n, mid, opts, master_seed)?;
            max_used = max_used.max(est.replicas);
            if uncertain {
                let quarter = 0.25 * (hi - lo);
                lo = mid - quarter;
                hi = mid + quarter;
            } else if est.mean < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            steps.push(StepRecord { n, beta: mid, indicator: est.mean, std_error: est.std_error, replicas: est.replicas, uncertain, bracket: (lo, hi) });
        }
        boxes.push(BoxBracket { n, beta_low: lo, beta_high: hi, max_replicas_used: max_used });
    }
    let beta_low = boxes.iter().map(|b| b.beta_low).fold(f64::INFINITY, f64::min);
    let beta_high = boxes.iter().map(|b| b.beta_high).fold(f64::NEG_INFINITY, f64::max);
    let mids: Vec<f64> = boxes.iter().map(|b| 0.5 * (b.beta_low + b.beta_high)).collect();
    let drift = mids.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - mids.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(CriticalEstimate { beta_low, beta_high, indicator: IndicatorKind::PhiCriterion, boxes, drift, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn zero_beta_indicator_is_zero() {
        let spec = KernelSpec::new(1, 0.5, 0.0).unwrap();
        let est = phi_indicator(&Sequential, &spec, 8, 50, 1).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn large_beta_indicator_is_large() {
        let spec = KernelSpec::new(1, 0.5, 20.0).unwrap();
        let est = phi_indicator(&Sequential, &spec, 8, 50, 1).unwrap();
        assert!(est.mean > 10.0, "{est:?}");
    }

    #[test]
    fn indicator_grows_with_beta() {
        let spec = KernelSpec::new(1, 0.5, 0.0).unwrap();
        let vals: Vec<ObservableEstimate> = [0.1, 0.3, 0.6, 1.2].iter().map(|&b| phi_indicator(&Sequential, &spec.with_beta(b), 16, 400, 9).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1].mean + 3.0 * w[1].std_error >= w[0].mean - 3.0 * w[0].std_error, "{vals:?}");
        }
    }

    #[test]
    fn rejects_infinite_critical_point() {
        let spec = KernelSpec::new(1, 1.5, 1.0).unwrap();
        let opts = BisectionOptions::new(8, 0.1, 2.0, 0.1, 50);
        assert!(matches!(bisect_beta_c(&Sequential, &spec, &opts, 1), Err(Error::InfiniteCriticalPoint { .. })));
    }

    #[test]
    fn rejects_bracket_with_both_ends_above() {
        let spec = KernelSpec::new(1, 0.5, 1.0).unwrap();
        let opts = BisectionOptions::new(8, 10.0, 20.0, 0.1, 100);
        assert!(matches!(bisect_beta_c(&Sequential, &spec, &opts, 1), Err(Error::InvalidBracket(_))));
    }

    #[test]
    fn small_bisection_brackets_the_crossing() {
        let spec = KernelSpec::new(1, 0.5, 1.0).unwrap();
        let mut opts = BisectionOptions::new(8, 0.05, 3.0, 0.05, 200);
        opts.max_replicas = 800;
        let est = bisect_beta_c(&Sequential, &spec, &opts, 4).unwrap();
        assert!(est.beta_low < est.beta_high);
        assert_eq!(est.boxes_used(), [8, 16]);
        assert!(est.boxes.iter().all(|b| b.beta_high - b.beta_low < 0.05 || est.steps.iter().any(|s| s.uncertain)));
        let again = bisect_beta_c(&Sequential, &spec, &opts, 4).unwrap();
        assert_eq!(est, again);
    }
}
