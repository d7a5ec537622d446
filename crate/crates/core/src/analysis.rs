//! Exponent fits and inequality checks.
//!
//! Constants that are only known to exist (the `C`, `C_2`, `C_3`, `C1_hat` of
//! the bounds) are never assumed: each check is either a slope comparison or
//! uses the smallest constant consistent with the data, and says which.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::clusters::{estimate_typical_value, QuantileEstimate, SizeHistogram};
use crate::exec::Executor;
use crate::kernel::{KernelSpec, LatticeBox};
use crate::observables::{sample_box_statistics, BoxStatistics, PhiProfile};
use crate::rng::SeedSpec;
use crate::stats::{linear_fit, wilson_interval, LinearFit, MeanAccumulator};
use crate::{Error, Result};

/// `f(n, alpha)`: `n^-alpha` for `alpha < 1`, `log(n) / n` at `alpha = 1`, `1/n` above.
pub fn f_scaling(n: u64, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition(format!("f(n, alpha) needs n >= 2, got {n}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidSpec(format!("alpha must be positive, got {alpha}")));
    }
    let n = n as f64;
    Ok(if alpha < 1.0 {
        libm::pow(n, -alpha)
    } else if alpha == 1.0 {
        libm::log(n) / n
    } else {
        1.0 / n
    })
}

fn min_one(alpha: &BigRational) -> BigRational {
    if *alpha < BigRational::one() {
        alpha.clone()
    } else {
        BigRational::one()
    }
}

/// `(d + min(alpha, 1)) / (d - min(alpha, 1))`, exactly.
pub fn delta_lower_bound(d: u32, alpha: &BigRational) -> Result<BigRational> {
    if !alpha.is_positive() {
        return Err(Error::InvalidSpec(format!("alpha must be positive, got {alpha}")));
    }
    let m = min_one(alpha);
    let d = BigRational::from_integer(BigInt::from(d));
    if m >= d {
        return Err(Error::Precondition(format!("min(alpha, 1) = {m} must be below d = {d}")));
    }
    Ok((&d + &m) / (&d - &m))
}

/// The rational value of a finite `f64`.
pub fn exact_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidSpec(format!("{x} is not a finite number")))
}

/// [`delta_lower_bound`] for the exact rational value of a float `alpha`.
pub fn delta_lower_bound_f64(d: u32, alpha: f64) -> Result<f64> {
    let r = delta_lower_bound(d, &exact_rational(alpha)?)?;
    r.to_f64().ok_or_else(|| Error::InvalidSpec("bound not representable".into()))
}

/// `min(alpha, 1)`.
pub fn two_eta_lower_bound(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidSpec(format!("alpha must be positive, got {alpha}")));
    }
    Ok(alpha.min(1.0))
}

/// `d (delta - 1) / (delta + 1)`, exactly; equals `min(alpha, 1)` at the lower bound.
pub fn two_eta_from_delta(d: u32, delta: &BigRational) -> BigRational {
    let d = BigRational::from_integer(BigInt::from(d));
    d * (delta - BigRational::one()) / (delta + BigRational::one())
}

/// Predicted exponents where the literature pins them down; `None` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjecturedExponents {
    pub delta: Option<f64>,
    pub two_eta: Option<f64>,
    /// Crossover value `alpha_c(d)` when known.
    pub alpha_c: Option<f64>,
}

/// Short-range `delta` and `2 - eta` for `d = 2`.
pub const DELTA_SR_2D: f64 = 91.0 / 5.0;
pub const TWO_ETA_SR_2D: f64 = 43.0 / 24.0;

pub fn conjectured_exponents(d: u32, alpha: f64) -> ConjecturedExponents {
    let df = d as f64;
    let alpha_c = (d == 2).then_some(TWO_ETA_SR_2D);
    let delta = if alpha <= df / 3.0 {
        Some(2.0)
    } else if d == 1 && alpha < 1.0 {
        Some((df + alpha) / (df - alpha))
    } else if d == 2 {
        Some(if alpha <= TWO_ETA_SR_2D { (df + alpha) / (df - alpha) } else { DELTA_SR_2D })
    } else {
        None
    };
    let two_eta = match d {
        1 if alpha < 1.0 => Some(alpha),
        2 => Some(alpha.min(TWO_ETA_SR_2D)),
        _ if alpha <= 1.0 => Some(alpha),
        _ => None,
    };
    ConjecturedExponents { delta, two_eta, alpha_c }
}

/// Powers of two from `4` (skipping the two smallest dyadic values) up to `max`.
pub fn dyadic_window(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut m = 4u64;
    while m <= max {
        out.push(m);
        m *= 2;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub min: f64,
    pub max: f64,
}

/// Log-log slope with its uncertainty and a window-drift diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub window: FitWindow,
    pub points: usize,
    /// Slopes on the lower and upper halves of the window.
    pub half_slopes: Option<(f64, f64)>,
    /// `|lower - upper|` and its standard error.
    pub drift: Option<(f64, f64)>,
    pub converged: bool,
}

/// Slopes that move by more than `max(3 sigma, DRIFT_FLOOR)` between the two
/// halves of the window are flagged as not converged.
pub const DRIFT_FLOOR: f64 = 0.1;

fn halves(p: usize) -> Option<(core::ops::Range<usize>, core::ops::Range<usize>)> {
    (p >= 4).then(|| (0..p.div_ceil(2), p / 2..p))
}

fn log_points(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InsufficientData("log-log fit needs positive finite data".into()));
    }
    Ok((x.iter().map(|v| libm::log(*v)).collect(), y.iter().map(|v| libm::log(*v)).collect()))
}

fn slope_variance(lx: &[f64], rel_se: &[f64]) -> f64 {
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    lx.iter().zip(rel_se).map(|(x, s)| (x - mx) * (x - mx) * s * s).sum::<f64>() / (sxx * sxx)
}

fn finish_fit(full: LinearFit, se: f64, x: &[f64], half: Option<((f64, f64), (f64, f64))>, drift_se: Option<f64>) -> SlopeFit {
    let drift = half.map(|((lo, _), (hi, _))| (libm::fabs(lo - hi), drift_se.unwrap_or(0.0)));
    let converged = drift.is_none_or(|(dr, s)| dr <= (3.0 * s).max(DRIFT_FLOOR));
    SlopeFit {
        slope: full.slope,
        intercept: full.intercept,
        std_error: se,
        window: FitWindow { min: x[0], max: x[x.len() - 1] },
        points: x.len(),
        half_slopes: half.map(|(lo, hi)| (lo.0, hi.0)),
        drift,
        converged,
    }
}

/// OLS slope of `log y` against `log x` for independent points; `std_error[i]`
/// is the standard error of `y[i]` and is propagated through the logarithm.
pub fn fit_power_law(x: &[f64], y: &[f64], std_error: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() != std_error.len() {
        return Err(Error::InsufficientData("fit inputs have different lengths".into()));
    }
    let (lx, ly) = log_points(x, y)?;
    let rel: Vec<f64> = y.iter().zip(std_error).map(|(v, s)| s / v).collect();
    let full = linear_fit(&lx, &ly)?;
    let se = libm::sqrt(slope_variance(&lx, &rel));
    let mut half = None;
    let mut drift_se = None;
    if let Some((a, b)) = halves(lx.len()) {
        let lo = linear_fit(&lx[a.clone()], &ly[a.clone()])?.slope;
        let hi = linear_fit(&lx[b.clone()], &ly[b.clone()])?.slope;
        let (vlo, vhi) = (slope_variance(&lx[a.clone()], &rel[a]), slope_variance(&lx[b.clone()], &rel[b]));
        half = Some(((lo, libm::sqrt(vlo)), (hi, libm::sqrt(vhi))));
        drift_se = Some(libm::sqrt(vlo + vhi));
    }
    Ok(finish_fit(full, se, x, half, drift_se))
}

/// Log-log slope whose `y` values are recomputed with each replica group left
/// out; standard errors (of the slope and of the half-window drift) come from
/// the delete-one-group jackknife.
/// Full slope, half-window slopes and the full linear fit of one jackknife pass.
type JackknifeFit = (f64, Option<(f64, f64)>, LinearFit);

pub fn fit_power_law_jackknife<F>(x: &[f64], groups: usize, mut y_without: F) -> Result<SlopeFit>
where
    F: FnMut(Option<usize>) -> Result<Vec<f64>>,
{
    let lx: Vec<f64> = log_points(x, x)?.0;
    let mut fits = |skip: Option<usize>| -> Result<JackknifeFit> {
        let y = y_without(skip)?;
        let (_, ly) = log_points(x, &y)?;
        let full = linear_fit(&lx, &ly)?;
        let half = match halves(lx.len()) {
            Some((a, b)) => Some((linear_fit(&lx[a.clone()], &ly[a])?.slope, linear_fit(&lx[b.clone()], &ly[b])?.slope)),
            None => None,
        };
        Ok((full.slope, half, full))
    };
    let (_, half_full, full) = fits(None)?;
    let mut leave: Vec<(f64, Option<(f64, f64)>)> = Vec::with_capacity(groups);
    for g in 0..groups {
        let (s, h, _) = fits(Some(g))?;
        leave.push((s, h));
    }
    let spread = |vals: &[f64]| -> f64 {
        let g = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / g;
        libm::sqrt(vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (g - 1.0) / g)
    };
    if groups < 2 {
        return Err(Error::InsufficientData("jackknife needs at least two groups".into()));
    }
    let se = spread(&leave.iter().map(|l| l.0).collect::<Vec<_>>());
    let (half, drift_se) = match half_full {
        Some((lo, hi)) => {
            let diffs: Vec<f64> = leave.iter().map(|l| l.1.map_or(0.0, |(a, b)| a - b)).collect();
            (Some(((lo, 0.0), (hi, 0.0))), Some(spread(&diffs)))
        }
        None => (None, None),
    };
    Ok(finish_fit(full, se, x, half, drift_se))
}

/// Survival data for [`fit_tail_exponent`].
#[derive(Debug, Clone, Copy)]
pub enum TailData<'a> {
    /// Survival values with independent standard errors (exact curves have zero error).
    Curve { thresholds: &'a [u64], survival: &'a [f64], std_error: &'a [f64] },
    /// Per-replica `|K_0|` samples; errors by jackknife over contiguous replica blocks.
    Replicas { thresholds: &'a [u64], sizes: &'a [u32], blocks: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailExponentFit {
    /// `theta_hat = -slope` of `log P(|K_0| >= m)` against `log m`.
    pub theta: f64,
    /// `delta_hat = 1 / theta_hat`; infinite when the slope vanishes.
    pub delta: f64,
    pub delta_std_error: f64,
    pub delta_infinite: bool,
    pub fit: SlopeFit,
    pub thresholds: Vec<u64>,
}

/// Relative standard error above which a threshold is left out of a tail fit.
pub const MAX_TAIL_RELATIVE_ERROR: f64 = 0.2;
pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_tail_exponent(data: TailData<'_>) -> Result<TailExponentFit> {
    fit_tail_exponent_with_min(data, MIN_FIT_POINTS)
}

fn fit_tail_exponent_with_min(data: TailData<'_>, min_points: usize) -> Result<TailExponentFit> {
    let (fit, thresholds) = match data {
        TailData::Curve { thresholds, survival, std_error } => {
            if thresholds.len() != survival.len() || thresholds.len() != std_error.len() {
                return Err(Error::InsufficientData("tail inputs have different lengths".into()));
            }
            let keep: Vec<usize> = (0..thresholds.len()).filter(|&i| survival[i] > 0.0 && std_error[i] < MAX_TAIL_RELATIVE_ERROR * survival[i]).collect();
            if keep.len() < min_points {
                return Err(Error::InsufficientData(format!("{} usable tail thresholds, need {min_points}", keep.len())));
            }
            let x: Vec<f64> = keep.iter().map(|&i| thresholds[i] as f64).collect();
            let y: Vec<f64> = keep.iter().map(|&i| survival[i]).collect();
            let s: Vec<f64> = keep.iter().map(|&i| std_error[i]).collect();
            (fit_power_law(&x, &y, &s)?, keep.iter().map(|&i| thresholds[i]).collect::<Vec<_>>())
        }
        TailData::Replicas { thresholds, sizes, blocks } => {
            let r = sizes.len();
            if r < 2 {
                return Err(Error::InsufficientData("tail fit needs replicas".into()));
            }
            let blocks = blocks.clamp(2, r);
            // per-block exceedance counts
            let mut counts = alloc::vec![0u64; blocks * thresholds.len()];
            let mut block_len = alloc::vec![0u64; blocks];
            for (i, &s) in sizes.iter().enumerate() {
                let b = i * blocks / r;
                block_len[b] += 1;
                for (j, &m) in thresholds.iter().enumerate() {
                    if s as u64 >= m {
                        counts[b * thresholds.len() + j] += 1;
                    }
                }
            }
            let total: u64 = block_len.iter().sum();
            let keep: Vec<usize> = (0..thresholds.len())
                .filter(|&j| {
                    let c: u64 = (0..blocks).map(|b| counts[b * thresholds.len() + j]).sum();
                    let p = c as f64 / total as f64;
                    // every leave-one-block-out estimate must stay positive for the log
                    let max_block = (0..blocks).map(|b| counts[b * thresholds.len() + j]).max().unwrap_or(0);
                    c > max_block && libm::sqrt(p * (1.0 - p) / total as f64) < MAX_TAIL_RELATIVE_ERROR * p
                })
                .collect();
            if keep.len() < min_points {
                return Err(Error::InsufficientData(format!("{} usable tail thresholds, need {min_points}", keep.len())));
            }
            let x: Vec<f64> = keep.iter().map(|&j| thresholds[j] as f64).collect();
            let fit = fit_power_law_jackknife(&x, blocks, |skip| {
                let n: u64 = (0..blocks).filter(|&b| Some(b) != skip).map(|b| block_len[b]).sum();
                Ok(keep.iter().map(|&j| (0..blocks).filter(|&b| Some(b) != skip).map(|b| counts[b * thresholds.len() + j]).sum::<u64>() as f64 / n as f64).collect())
            })?;
            (fit, keep.iter().map(|&j| thresholds[j]).collect())
        }
    };
    let theta = -fit.slope;
    let delta_infinite = libm::fabs(theta) < 1e-12;
    let (delta, delta_std_error) = if delta_infinite { (f64::INFINITY, f64::INFINITY) } else { (1.0 / theta, fit.std_error / (theta * theta)) };
    Ok(TailExponentFit { theta, delta, delta_std_error, delta_infinite, fit, thresholds })
}

/// `2 - eta_hat = d + slope` of `log(|Lambda_n|^-1 sum_x t_x)` against `log n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointExponentFit {
    pub two_eta: f64,
    pub std_error: f64,
    pub fit: SlopeFit,
    /// Whether the fit used box averages (`true`) or axis values of `t_x` (`false`).
    pub averaged: bool,
}

/// Box averages across radii, points independent.
pub fn fit_two_point_exponent(d: u32, radii: &[u32], averages: &[f64], std_error: &[f64]) -> Result<TwoPointExponentFit> {
    if radii.len() < 2 {
        return Err(Error::InsufficientData("two-point fit needs at least two radii".into()));
    }
    let x: Vec<f64> = radii.iter().map(|&n| n as f64).collect();
    let fit = fit_power_law(&x, averages, std_error)?;
    Ok(TwoPointExponentFit { two_eta: fit.slope + d as f64, std_error: fit.std_error, fit, averaged: true })
}

/// Unaveraged version: `t_x` at `x = (m, 0, ..., 0)` for several `m`.
pub fn fit_two_point_axis(d: u32, distances: &[u32], t: &[f64], std_error: &[f64]) -> Result<TwoPointExponentFit> {
    let x: Vec<f64> = distances.iter().map(|&m| m as f64).collect();
    let fit = fit_power_law(&x, t, std_error)?;
    Ok(TwoPointExponentFit { two_eta: fit.slope + d as f64, std_error: fit.std_error, fit, averaged: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperscalingLine {
    /// `(2 - eta)(delta + 1)`
    pub left: f64,
    /// `d (delta - 1)`
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub d: u32,
    pub alpha: f64,
    pub beta: f64,
    pub tail: Option<TailExponentFit>,
    pub two_point: Option<TwoPointExponentFit>,
    /// Kept apart from the averaged fit: the two need not agree.
    pub two_point_unaveraged: Option<TwoPointExponentFit>,
    pub lower_bound_delta: f64,
    pub lower_bound_two_eta: f64,
    pub conjectured: ConjecturedExponents,
    /// Derived consistency line only, not a check.
    pub hyperscaling: Option<HyperscalingLine>,
    /// Reasons the fits should not be read as exponents.
    pub flags: Vec<String>,
}

impl ExponentReport {
    pub fn new(spec: &KernelSpec, tail: Option<TailExponentFit>, two_point: Option<TwoPointExponentFit>, unaveraged: Option<TwoPointExponentFit>) -> Result<Self> {
        let d = spec.d as u32;
        let mut flags = Vec::new();
        if let Some(t) = &tail {
            if !t.fit.converged {
                flags.push(format!("tail slope drifts across the window: halves {:?}", t.fit.half_slopes));
            }
            if t.delta_infinite {
                flags.push("tail slope is zero: delta_hat is infinite".into());
            }
        }
        if let Some(t) = &two_point {
            if !t.fit.converged {
                flags.push(format!("two-point slope drifts across the window: halves {:?}", t.fit.half_slopes));
            }
        }
        let hyperscaling = match (&tail, &two_point) {
            (Some(t), Some(p)) if !t.delta_infinite => Some(HyperscalingLine { left: p.two_eta * (t.delta + 1.0), right: d as f64 * (t.delta - 1.0) }),
            _ => None,
        };
        Ok(Self {
            d,
            alpha: spec.alpha,
            beta: spec.beta,
            tail,
            two_point,
            two_point_unaveraged: unaveraged,
            lower_bound_delta: delta_lower_bound_f64(d, spec.alpha)?,
            lower_bound_two_eta: two_eta_lower_bound(spec.alpha)?,
            conjectured: conjectured_exponents(d, spec.alpha),
            hyperscaling,
            flags,
        })
    }

    pub fn converged(&self) -> bool {
        self.flags.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InequalityKind {
    /// `P(|K_max| >= a M) <= exp(-a/9)`
    LargestClusterTightness { multiplier: f64 },
    /// `P(|K_0 cap Lambda| >= a M) <= e P(|K_0 cap Lambda| >= M) exp(-a/9)`
    SingleClusterTightness { multiplier: f64 },
    /// `M(Lambda) <= 3 C |Lambda|^(1/(1+theta))`
    QuantileBound { radius: u32 },
    /// growth exponent of `E|K_0(Lambda_n)|` at most `d (1 - theta)/(1 + theta)`
    MomentBoundTheta,
    /// growth exponent of `E|K_0(Lambda_n)|` at most `2 - eta`
    MomentBoundTwoPoint,
    /// growth exponent of `sum_x t_x` at least `min(alpha, 1)`
    TwoPointDecay,
    /// `delta_hat >= (d + min(alpha,1)) / (d - min(alpha,1))`
    ClusterDecay,
    /// `n^-1 sum_k phi(Lambda_k) <= C1_hat E|K_0(Lambda_n)| f(n, alpha)`
    PhiAveraging,
}

impl InequalityKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LargestClusterTightness { .. } => "largest_cluster_tightness",
            Self::SingleClusterTightness { .. } => "single_cluster_tightness",
            Self::QuantileBound { .. } => "quantile_bound",
            Self::MomentBoundTheta => "moment_bound_theta",
            Self::MomentBoundTwoPoint => "moment_bound_two_point",
            Self::TwoPointDecay => "two_point_decay",
            Self::ClusterDecay => "cluster_decay",
            Self::PhiAveraging => "phi_averaging",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Violated => "violated",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Side {
    pub value: f64,
    pub std_error: f64,
}

impl Side {
    pub const fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

/// Check of `left <= right`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub kind: InequalityKind,
    pub left: Side,
    pub right: Side,
    /// Standard error of `left - right` (accounts for shared replicas).
    pub difference_std_error: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Which grid entry this is.
    pub setting: String,
    /// How unknown constants were replaced.
    pub note: String,
}

/// `holds` if `left - right <= tolerance`; `violated` if it exceeds
/// `max(tolerance, 3 sigma)`; `inconclusive` in between.
pub fn verdict(margin: f64, sigma: f64, tolerance: f64) -> Verdict {
    if margin <= tolerance {
        Verdict::Holds
    } else if margin > tolerance.max(3.0 * sigma) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    }
}

/// Tolerance of slope checks: `max(3 sigma, 0.05)`.
pub fn slope_tolerance(sigma: f64) -> f64 {
    (3.0 * sigma).max(0.05)
}

impl InequalityReport {
    pub fn new(kind: InequalityKind, left: Side, right: Side, difference_std_error: Option<f64>, tolerance: f64, setting: &str, note: &str) -> Self {
        let sigma = difference_std_error.unwrap_or_else(|| libm::sqrt(left.std_error * left.std_error + right.std_error * right.std_error));
        Self { kind, left, right, difference_std_error: sigma, tolerance, verdict: verdict(left.value - right.value, sigma, tolerance), setting: setting.into(), note: note.into() }
    }
}

pub fn setting_label(spec: &KernelSpec, lattice: LatticeBox) -> String {
    format!("d={} alpha={} beta={} n={}", spec.d, spec.alpha, spec.beta, lattice.n)
}

/// Salt for the replica family used to estimate `M` in tightness checks.
pub const TIGHTNESS_M_SALT: u64 = 0x4d;

/// Both tightness inequalities at each multiplier `a >= 1`. `M` is estimated
/// on a replica set independent of the one the probabilities are read from,
/// and the lower Wilson edge `m_low` is used (the smaller `M`, the harder the check).
pub fn check_universal_tightness<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    lattice: LatticeBox,
    replicas: u64,
    multipliers: &[f64],
    master_seed: u64,
) -> Result<(QuantileEstimate, Vec<InequalityReport>)> {
    if let Some(a) = multipliers.iter().find(|&&a| !(a >= 1.0)) {
        return Err(Error::Precondition(format!("tightness multipliers must be >= 1, got {a}")));
    }
    let (q, _) = estimate_typical_value(exec, spec, lattice, replicas, SeedSpec::derived_master(master_seed, TIGHTNESS_M_SALT))?;
    let stats = sample_box_statistics(exec, spec, lattice, 0..replicas, master_seed, false)?;
    let reports = tightness_from_samples(&stats, &q, multipliers, &setting_label(spec, lattice))?;
    Ok((q, reports))
}

/// The tightness reports of [`check_universal_tightness`] from an existing
/// sample and an `M` estimated on independent replicas.
pub fn tightness_from_samples(stats: &BoxStatistics, q: &QuantileEstimate, multipliers: &[f64], setting: &str) -> Result<Vec<InequalityReport>> {
    if let Some(a) = multipliers.iter().find(|&&a| !(a >= 1.0)) {
        return Err(Error::Precondition(format!("tightness multipliers must be >= 1, got {a}")));
    }
    if stats.replicas() == 0 {
        return Err(Error::InsufficientData("tightness needs at least one replica".into()));
    }
    let m = q.m_low;
    let r = stats.replicas() as f64;
    let mut reports = Vec::new();
    for &a in multipliers {
        let threshold = libm::ceil(a * m as f64) as u64;
        let decay = libm::exp(-a / 9.0);
        let hits = stats.largest_sizes.iter().filter(|&&s| s as u64 >= threshold).count() as f64;
        let p = hits / r;
        reports.push(InequalityReport::new(
            InequalityKind::LargestClusterTightness { multiplier: a },
            Side { value: p, std_error: libm::sqrt(p * (1.0 - p) / r) },
            Side::exact(decay),
            None,
            0.0,
            setting,
            &format!("M = {m} (lower Wilson edge, independent replicas); threshold ceil(a M) = {threshold}"),
        ));
        // paired per-replica difference 1{|K_0| >= aM} - e^{1-a/9} 1{|K_0| >= M}
        let factor = core::f64::consts::E * decay;
        let (mut left, mut right, mut diff) = (MeanAccumulator::new(), MeanAccumulator::new(), MeanAccumulator::new());
        for &s in &stats.origin_sizes {
            let l = if s as u64 >= threshold { 1.0 } else { 0.0 };
            let rr = if s as u64 >= m { factor } else { 0.0 };
            left.push(l);
            right.push(rr);
            diff.push(l - rr);
        }
        reports.push(InequalityReport::new(
            InequalityKind::SingleClusterTightness { multiplier: a },
            Side { value: left.mean(), std_error: left.std_error() },
            Side { value: right.mean(), std_error: right.std_error() },
            Some(diff.std_error()),
            0.0,
            setting,
            &format!("u = 0, cluster taken inside the sampled box; M = {m}"),
        ));
    }
    Ok(reports)
}

/// Leading thresholds on which two boxes (radius `n` and a smaller one) agree
/// within `z` combined standard errors and the larger box has relative error
/// below [`MAX_TAIL_RELATIVE_ERROR`]. Beyond the first disagreement the tail
/// of the larger box is shaped by the box, not by the infinite-volume law.
pub fn finite_size_stable_thresholds(large: &SizeHistogram, small: &SizeHistogram, thresholds: &[u64], z: f64) -> Vec<u64> {
    let (nl, ns) = (large.total() as f64, small.total() as f64);
    let mut out = Vec::new();
    for &m in thresholds {
        let (pl, ps) = (large.survival(m), small.survival(m));
        let se = libm::sqrt(pl * (1.0 - pl) / nl + ps * (1.0 - ps) / ns);
        let rel_ok = pl > 0.0 && libm::sqrt(pl * (1.0 - pl) / nl) < MAX_TAIL_RELATIVE_ERROR * pl;
        if !rel_ok || libm::fabs(pl - ps) > z * se {
            break;
        }
        out.push(m);
    }
    out
}

/// Log-spaced thresholds `round(2^(j/2))` from 4 up to `max`, without repeats.
pub fn half_dyadic_window(max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut j = 4;
    loop {
        let m = libm::round(libm::pow(2.0, j as f64 / 2.0)) as u64;
        if m > max {
            return out;
        }
        if out.last() != Some(&m) {
            out.push(m);
        }
        j += 1;
    }
}

/// Tail exponent used as the hypothesis of the quantile and moment bounds:
/// the slope over the upper half of the finite-size-stable window of
/// [`half_dyadic_window`] thresholds. The hypothesis is about large `k`, so
/// the flattest stable part of the tail is the relevant (and the least
/// demanding) one. At least three thresholds are used.
pub fn bound_hypothesis_theta(large: &BoxStatistics, small: &BoxStatistics, blocks: usize) -> Result<TailExponentFit> {
    let max = large.origin_sizes.iter().copied().max().unwrap_or(1) as u64;
    let grid = half_dyadic_window(max.max(4));
    let stable = finite_size_stable_thresholds(&large.origin_histogram(), &small.origin_histogram(), &grid, 3.0);
    if stable.len() < 3 {
        return Err(Error::InsufficientData(format!("only {} finite-size-stable tail thresholds", stable.len())));
    }
    let upper = stable[(stable.len() / 2).min(stable.len() - 3)..].to_vec();
    fit_tail_exponent_with_min(TailData::Replicas { thresholds: &upper, sizes: &large.origin_sizes, blocks }, 3)
}

/// Caps a fitted `theta` so that `C k^-theta` (with `C = exp(intercept)`)
/// stays above the upper Wilson edge (`z = 3`) of the box tail at every
/// threshold beyond the fit window. The box tail is a lower bound for the
/// infinite-volume tail, so a power law that falls below it at large `k`
/// does not hold there. Supercritical samples, whose tail flattens, end up
/// near `theta = 0`.
pub fn theta_consistent_with_tail(fit: &TailExponentFit, tail: &SizeHistogram) -> f64 {
    let last = fit.thresholds.last().copied().unwrap_or(1);
    let log_c = fit.fit.intercept;
    let mut theta = fit.theta;
    for m in half_dyadic_window(tail.max_value()).into_iter().filter(|&m| m > last) {
        let upper = wilson_interval(tail.count_at_least(m), tail.total(), 3.0).1;
        if upper > 0.0 {
            theta = theta.min((log_c - libm::log(upper)) / libm::log(m as f64));
        }
    }
    theta.max(0.0)
}

/// Smallest `C >= 1` with `sum_{k<=N} S(k) <= C N^(1-theta)` for every `N` up to
/// the largest observed size, `S` being an empirical survival function.
pub fn smallest_theta_constant(tail: &SizeHistogram, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Precondition(format!("the tail hypothesis needs 0 <= theta <= 1, got {theta}")));
    }
    if tail.total() == 0 {
        return Err(Error::InsufficientData("empty tail sample".into()));
    }
    let mut partial = 0.0;
    let mut c = 1.0f64;
    for k in 1..=tail.max_value().max(1) {
        partial += tail.survival(k);
        c = c.max(partial / libm::pow(k as f64, 1.0 - theta));
    }
    Ok(c)
}

/// The `theta` on a grid of step 0.01 in `[0, 1]` minimising
/// `3 C(theta) size^(1/(1+theta))`, with `C(theta)` from [`smallest_theta_constant`].
/// The quantile bound holds for every admissible pair, so this is its
/// strictest form when no tail exponent can be fitted.
pub fn quantile_bound_theta(tail: &SizeHistogram, size: usize) -> Result<f64> {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=100 {
        let theta = i as f64 / 100.0;
        let bound = 3.0 * smallest_theta_constant(tail, theta)? * libm::pow(size as f64, 1.0 / (1.0 + theta));
        if bound < best.0 {
            best = (bound, theta);
        }
    }
    Ok(best.1)
}

/// `M_hat(Lambda_n) <= 3 C |Lambda_n|^(1/(1+theta))` per box, `C` from
/// [`smallest_theta_constant`] on `tail`. Uses the pessimistic `m_high`; only an
/// `m_low` above the bound counts as a violation.
pub fn check_quantile_bound(tail: &SizeHistogram, theta: f64, boxes: &[(LatticeBox, QuantileEstimate)], setting: &str) -> Result<Vec<InequalityReport>> {
    let c = smallest_theta_constant(tail, theta)?;
    Ok(boxes
        .iter()
        .map(|(lattice, q)| {
            let bound = 3.0 * c * libm::pow(lattice.len() as f64, 1.0 / (1.0 + theta));
            let v = if (q.m_high as f64) <= bound {
                Verdict::Holds
            } else if (q.m_low as f64) > bound {
                Verdict::Violated
            } else {
                Verdict::Inconclusive
            };
            InequalityReport {
                kind: InequalityKind::QuantileBound { radius: lattice.n },
                left: Side { value: q.m_hat as f64, std_error: (q.m_high - q.m_low) as f64 / 6.0 },
                right: Side::exact(bound),
                difference_std_error: (q.m_high - q.m_low) as f64 / 6.0,
                tolerance: 0.0,
                verdict: v,
                setting: setting.into(),
                note: format!("C = {c} is the smallest constant >= 1 fitting the empirical tail with theta = {theta}; verdict uses m_high = {} and m_low = {}", q.m_high, q.m_low),
            }
        })
        .collect())
}

/// Growth exponent of `E|K_0(Lambda_n)|` in `n` against `d (1-theta)/(1+theta)`
/// and, if given, against `2 - eta`. `means[i] = (n_i, mean, std_error)`.
pub fn check_moment_bound(d: u32, means: &[(u32, f64, f64)], theta: (f64, f64), two_eta: Option<(f64, f64)>, setting: &str) -> Result<Vec<InequalityReport>> {
    if means.len() < 2 {
        return Err(Error::InsufficientData("moment check needs at least two box sizes".into()));
    }
    let x: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let y: Vec<f64> = means.iter().map(|m| m.1).collect();
    let s: Vec<f64> = means.iter().map(|m| m.2).collect();
    let growth = fit_power_law(&x, &y, &s)?;
    let (th, th_se) = (theta.0.clamp(0.0, 1.0), theta.1);
    let target = d as f64 * (1.0 - th) / (1.0 + th);
    // d/dtheta of d (1-theta)/(1+theta) = -2d/(1+theta)^2
    let target_se = 2.0 * d as f64 / ((1.0 + th) * (1.0 + th)) * th_se;
    let sigma = libm::sqrt(growth.std_error * growth.std_error + target_se * target_se);
    let mut out = alloc::vec![InequalityReport::new(
        InequalityKind::MomentBoundTheta,
        Side { value: growth.slope, std_error: growth.std_error },
        Side { value: target, std_error: target_se },
        None,
        slope_tolerance(sigma),
        setting,
        &format!("slope comparison; theta clamped to [0, 1] (used {th}); constant C_2 not assumed"),
    )];
    if let Some((te, te_se)) = two_eta {
        let sigma = libm::sqrt(growth.std_error * growth.std_error + te_se * te_se);
        out.push(InequalityReport::new(
            InequalityKind::MomentBoundTwoPoint,
            Side { value: growth.slope, std_error: growth.std_error },
            Side { value: te, std_error: te_se },
            None,
            slope_tolerance(sigma),
            setting,
            "slope comparison against the fitted 2 - eta; constant 3^d C not assumed",
        ));
    }
    Ok(out)
}

/// Growth of `sum_x t_x` at least `min(alpha, 1)`, and `delta_hat` at least its lower bound.
/// `sums[i] = (n_i, sum, std_error)`.
pub fn check_propositions(spec: &KernelSpec, sums: &[(u32, f64, f64)], delta_hat: Option<(f64, f64)>, setting: &str) -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    let target = two_eta_lower_bound(spec.alpha)?;
    if sums.len() >= 2 {
        let x: Vec<f64> = sums.iter().map(|m| m.0 as f64).collect();
        let y: Vec<f64> = sums.iter().map(|m| m.1).collect();
        let s: Vec<f64> = sums.iter().map(|m| m.2).collect();
        let fit = fit_power_law(&x, &y, &s)?;
        out.push(InequalityReport::new(
            InequalityKind::TwoPointDecay,
            Side::exact(target),
            Side { value: fit.slope, std_error: fit.std_error },
            None,
            slope_tolerance(fit.std_error),
            setting,
            "slope of log sum_x t_x against log n; C_3 not assumed",
        ));
    }
    if let Some((delta, se)) = delta_hat {
        let bound = delta_lower_bound_f64(spec.d as u32, spec.alpha)?;
        out.push(InequalityReport::new(
            InequalityKind::ClusterDecay,
            Side::exact(bound),
            Side { value: delta, std_error: se },
            None,
            (3.0 * se).max(0.1 * bound),
            setting,
            "tolerance max(3 sigma, 10% of the bound)",
        ));
    }
    Ok(out)
}

/// `n^-1 sum_k phi_hat(Lambda_k) <= C1_hat E|K_0(Lambda_n)| f(n, alpha)` with the
/// computed constant of the profile. Holds replica by replica, so any violation is a bug.
pub fn check_phi_averaging(profile: &PhiProfile, setting: &str) -> Result<InequalityReport> {
    let (c, f, k0) = match (profile.averaging_constant, profile.f_n, profile.origin_cluster) {
        (Some(c), Some(f), Some(k0)) => (c, f, k0),
        _ => return Err(Error::InsufficientData("profile has no averaging data (needs n >= 2 and k up to n)".into())),
    };
    Ok(InequalityReport::new(
        InequalityKind::PhiAveraging,
        Side { value: profile.average.mean, std_error: profile.average.std_error },
        Side { value: c * k0.mean * f, std_error: c * k0.std_error * f },
        None,
        0.0,
        setting,
        &format!("C1_hat = {c} = max_a n^-1 sum_k ext(a, k) / f(n, alpha)"),
    ))
}
