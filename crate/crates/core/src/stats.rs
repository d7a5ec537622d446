//! Monte Carlo estimates, confidence intervals, jackknife and least-squares fits.

use alloc::vec::Vec;

use crate::math::CompensatedSum;
use crate::{Error, Result};

/// Which quantity an [`ObservableEstimate`] refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefinitionTag {
    /// `P(|K_0(Lambda_n)| >= threshold)`
    TailSurvival { threshold: u64 },
    /// `E|K_0(Lambda_n)|`
    OriginClusterMean,
    /// `|Lambda_n|^-1 * sum_x t_x`
    BoxAverageTwoPoint,
    /// `phi_beta(Lambda_k)`
    Phi { k: u32 },
    /// `min_k phi_beta(Lambda_k)`
    PhiMinimum,
    /// `n^-1 * sum_k phi_beta(Lambda_k)`
    PhiAverage,
    /// `E[X_k]`
    BoundaryCrossings { k: u32 },
    /// `E[X_k] + sum_a t_a * ext(a, n)`, an independent estimate of `phi_beta(Lambda_k)`
    BoundaryCrossingsCorrected { k: u32 },
    /// `P(|K_max(Lambda_n)| >= eps * |Lambda_n|)`
    CrossingFraction,
    /// Probability of an event, as named by the caller.
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub tag: DefinitionTag,
}

impl ObservableEstimate {
    /// Bernoulli frequency `successes / trials` with its binomial standard error.
    pub fn from_counts(tag: DefinitionTag, successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { mean: 0.0, std_error: 0.0, replicas: 0, tag };
        }
        let p = successes as f64 / trials as f64;
        Self { mean: p, std_error: libm::sqrt(p * (1.0 - p) / trials as f64), replicas: trials, tag }
    }

    pub fn z_score(&self, truth: f64) -> f64 {
        let diff = self.mean - truth;
        if diff == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            diff / self.std_error
        }
    }

    /// `|mean - truth| <= z * std_error`
    pub fn within(&self, truth: f64, z: f64) -> bool {
        libm::fabs(self.mean - truth) <= z * self.std_error
    }
}

/// Running mean and variance of a scalar. Sums are compensated and merged by
/// addition, so a fixed merge order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum.value() / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.mean();
        ((self.sum_sq.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean. For a mean this coincides with the
    /// delete-one jackknife over replicas.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        libm::sqrt(self.variance() / self.count as f64)
    }

    pub fn estimate(&self, tag: DefinitionTag) -> ObservableEstimate {
        ObservableEstimate { mean: self.mean(), std_error: self.std_error(), replicas: self.count, tag }
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Delete-one-group jackknife. `estimate(None)` is the full-sample estimate and
/// `estimate(Some(g))` the estimate with group `g` left out.
/// Returns `(full estimate, standard error)`.
pub fn jackknife<F>(groups: usize, mut estimate: F) -> Result<(f64, f64)>
where
    F: FnMut(Option<usize>) -> Result<f64>,
{
    if groups < 2 {
        return Err(Error::InsufficientData("jackknife needs at least two groups".into()));
    }
    let full = estimate(None)?;
    let mut leave_out = Vec::with_capacity(groups);
    for g in 0..groups {
        leave_out.push(estimate(Some(g))?);
    }
    let g = groups as f64;
    let mean = leave_out.iter().sum::<f64>() / g;
    let var = leave_out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (g - 1.0) / g;
    Ok((full, libm::sqrt(var)))
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares (weighted for weighted fits).
    pub residual: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    weighted_linear_fit(x, y, None)
}

/// Weighted least squares; `weights` default to 1.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    if x.len() != y.len() || weights.is_some_and(|w| w.len() != x.len()) {
        return Err(Error::InsufficientData("fit inputs have different lengths".into()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("a line fit needs at least two points".into()));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        if !(x[i].is_finite() && y[i].is_finite() && w(i).is_finite() && w(i) > 0.0) {
            return Err(Error::InsufficientData("non-finite or non-positive fit input".into()));
        }
        sw += w(i);
        sx += w(i) * x[i];
        sy += w(i) * y[i];
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..x.len() {
        sxx += w(i) * (x[i] - mx) * (x[i] - mx);
        sxy += w(i) * (x[i] - mx) * (y[i] - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate fit window".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (0..x.len()).map(|i| w(i) * libm::pow(y[i] - intercept - slope * x[i], 2.0)).sum();
    Ok(LinearFit { slope, intercept, residual, points: x.len() })
}
