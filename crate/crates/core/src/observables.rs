//! Monte Carlo estimators: cluster-size tails, the two-point table, `X_k` and
//! the sharpness functional
//! `phi_beta(Lambda_k) = sum_{x in Lambda_k} ext(x, k) * P(0 <-> x within Lambda_k)`.
//!
//! Exterior weights `ext(x, k)` are exact (see [`crate::kernel::ExteriorSums`]);
//! only connectivity is sampled. Each replica contributes the scalar
//! `sum_{x in K_0(Lambda_k)} ext(x, k)`, whose mean is `phi`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::analysis::f_scaling;
use crate::clusters::{DisjointSets, NestedClusterWalker, SizeHistogram};
use crate::exec::{fold_replicas, Executor};
use crate::kernel::{ExteriorSums, KernelSpec, LatticeBox};
use crate::rng::SeedSpec;
use crate::sampler::{Configuration, Edge, GroupedSampler, SamplerScratch};
use crate::stats::{jackknife, DefinitionTag, MeanAccumulator, ObservableEstimate};
use crate::{Error, Result};

/// Per-replica cluster statistics of one box, ordered by replica index.
#[derive(Debug, Clone, Default)]
pub struct BoxStatistics {
    pub lattice: Option<LatticeBox>,
    /// `|K_0(Lambda_n)|` per replica.
    pub origin_sizes: Vec<u32>,
    /// `|K_max(Lambda_n)|` per replica.
    pub largest_sizes: Vec<u32>,
    /// Per-vertex counts of `{0 <-> x within Lambda_n}`, when requested.
    pub connection_counts: Option<Vec<u64>>,
}

impl BoxStatistics {
    pub fn replicas(&self) -> u64 {
        self.origin_sizes.len() as u64
    }

    pub fn origin_histogram(&self) -> SizeHistogram {
        let mut h = SizeHistogram::default();
        self.origin_sizes.iter().for_each(|&s| h.record(s));
        h
    }

    pub fn largest_histogram(&self) -> SizeHistogram {
        let mut h = SizeHistogram::default();
        self.largest_sizes.iter().for_each(|&s| h.record(s));
        h
    }

    pub fn origin_mean(&self) -> ObservableEstimate {
        let mut acc = MeanAccumulator::new();
        self.origin_sizes.iter().for_each(|&s| acc.push(s as f64));
        acc.estimate(DefinitionTag::OriginClusterMean)
    }
}

/// One pass over `replicas`: samples each configuration and records the origin
/// and largest cluster sizes, plus the per-vertex connection counts if asked.
pub fn sample_box_statistics<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    lattice: LatticeBox,
    replicas: Range<u64>,
    master_seed: u64,
    with_two_point: bool,
) -> Result<BoxStatistics> {
    let sampler = GroupedSampler::new(spec, lattice)?;
    let len = lattice.len();
    let origin = lattice.origin_index() as u32;
    struct Work {
        stats: BoxStatistics,
        edges: Vec<Edge>,
        scratch: SamplerScratch,
        dsu: DisjointSets,
    }
    let init = || Work {
        stats: BoxStatistics { lattice: Some(lattice), connection_counts: with_two_point.then(|| vec![0; len]), ..Default::default() },
        edges: Vec::new(),
        scratch: SamplerScratch::default(),
        dsu: DisjointSets::default(),
    };
    let out = fold_replicas(
        exec,
        replicas,
        init,
        |w, r| {
            sampler.sample_edges_into(SeedSpec::new(master_seed, r), &mut w.edges, &mut w.scratch);
            w.dsu.reset(len);
            let mut largest = 1;
            for e in &w.edges {
                if w.dsu.union(e.a, e.b).is_some() {
                    largest = largest.max(w.dsu.set_size(e.a));
                }
            }
            let root = w.dsu.find(origin);
            w.stats.origin_sizes.push(w.dsu.set_size(root));
            w.stats.largest_sizes.push(largest);
            if let Some(counts) = w.stats.connection_counts.as_mut() {
                for (v, c) in counts.iter_mut().enumerate() {
                    if w.dsu.find(v as u32) == root {
                        *c += 1;
                    }
                }
            }
        },
        |acc, part| {
            acc.stats.origin_sizes.extend_from_slice(&part.stats.origin_sizes);
            acc.stats.largest_sizes.extend_from_slice(&part.stats.largest_sizes);
            if let (Some(a), Some(b)) = (acc.stats.connection_counts.as_mut(), part.stats.connection_counts.as_ref()) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        },
    );
    Ok(out.stats)
}

/// `P(|K_0| >= m)` for each threshold, read off one histogram (hence monotone).
pub fn tail_from_histogram(hist: &SizeHistogram, thresholds: &[u64]) -> Vec<ObservableEstimate> {
    thresholds.iter().map(|&m| ObservableEstimate::from_counts(DefinitionTag::TailSurvival { threshold: m }, hist.count_at_least(m), hist.total())).collect()
}

fn check_thresholds(thresholds: &[u64], lattice: LatticeBox) -> Result<()> {
    match thresholds.iter().find(|&&m| m > lattice.len() as u64) {
        Some(m) => Err(Error::Precondition(format!("threshold {m} exceeds |Lambda| = {}", lattice.len()))),
        None => Ok(()),
    }
}

/// Finite-volume tail `P(|K_0(Lambda_n)| >= m)`, a lower bound for `P(|K_0| >= m)`.
pub fn estimate_tail<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    lattice: LatticeBox,
    thresholds: &[u64],
    replicas: u64,
    master_seed: u64,
) -> Result<Vec<ObservableEstimate>> {
    check_thresholds(thresholds, lattice)?;
    let stats = sample_box_statistics(exec, spec, lattice, 0..replicas, master_seed, false)?;
    Ok(tail_from_histogram(&stats.origin_histogram(), thresholds))
}

/// Tail estimate with the box radius doubled until no threshold moves by
/// more than one combined standard error.
#[derive(Debug, Clone)]
pub struct StableTail {
    pub estimates: Vec<ObservableEstimate>,
    /// Radius of the box the estimates come from.
    pub n: u32,
    /// Whether the last doubling moved every threshold by less than one standard error.
    pub stable: bool,
    pub history: Vec<(u32, Vec<ObservableEstimate>)>,
}

pub fn estimate_tail_stable<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    n_start: u32,
    n_max: u32,
    thresholds: &[u64],
    replicas: u64,
    master_seed: u64,
) -> Result<StableTail> {
    let mut n = n_start.max(1);
    let mut history = Vec::new();
    let mut prev: Option<Vec<ObservableEstimate>> = None;
    loop {
        let lattice = LatticeBox::new(spec.d, n)?;
        let est = estimate_tail(exec, spec, lattice, thresholds, replicas, master_seed)?;
        history.push((n, est.clone()));
        if let Some(p) = &prev {
            let moved = p.iter().zip(&est).any(|(a, b)| {
                let se = libm::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
                libm::fabs(a.mean - b.mean) >= se && a.mean != b.mean
            });
            if !moved {
                return Ok(StableTail { estimates: est, n, stable: true, history });
            }
        }
        if n.saturating_mul(2) > n_max {
            return Ok(StableTail { estimates: est, n, stable: false, history });
        }
        prev = Some(est);
        n *= 2;
    }
}

/// Estimates of `t_x = P(0 <-> x within Lambda_n)` for every `x in Lambda_n`.
/// Restricted connectivity makes these lower bounds for the unrestricted
/// two-point function.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointTable {
    pub lattice: LatticeBox,
    pub replicas: u64,
    /// Number of replicas with `0 <-> x`, by vertex index.
    pub counts: Vec<u64>,
    /// `E|K_0(Lambda_n)|` from the per-replica sizes of the same replicas.
    pub origin_cluster: ObservableEstimate,
}

impl TwoPointTable {
    pub fn from_statistics(stats: &BoxStatistics) -> Result<Self> {
        let lattice = stats.lattice.ok_or_else(|| Error::InsufficientData("statistics carry no box".into()))?;
        let counts = stats.connection_counts.clone().ok_or_else(|| Error::InsufficientData("statistics were sampled without connection counts".into()))?;
        Ok(Self { lattice, replicas: stats.replicas(), counts, origin_cluster: stats.origin_mean() })
    }

    pub fn t_hat(&self, v: usize) -> f64 {
        self.counts[v] as f64 / self.replicas as f64
    }

    pub fn std_error(&self, v: usize) -> f64 {
        let t = self.t_hat(v);
        libm::sqrt(t * (1.0 - t) / self.replicas as f64)
    }

    /// `sum_x t_hat_x`. Counts are integers, so this equals the mean of
    /// `|K_0(Lambda_n)|` over the same replicas up to one rounding.
    pub fn sum(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.replicas as f64
    }

    /// `|Lambda_n|^-1 * sum_x t_hat_x`, with the standard error of the cluster-size mean.
    pub fn box_average(&self) -> ObservableEstimate {
        let len = self.lattice.len() as f64;
        ObservableEstimate { mean: self.sum() / len, std_error: self.origin_cluster.std_error / len, replicas: self.replicas, tag: DefinitionTag::BoxAverageTwoPoint }
    }

    /// Index of `-x`.
    pub fn mirror(&self, v: usize) -> usize {
        self.lattice.len() - 1 - v
    }
}

pub fn estimate_two_point<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, lattice: LatticeBox, replicas: u64, master_seed: u64) -> Result<TwoPointTable> {
    if replicas == 0 {
        return Err(Error::Precondition("two-point estimation needs at least one replica".into()));
    }
    let stats = sample_box_statistics(exec, spec, lattice, 0..replicas, master_seed, true)?;
    TwoPointTable::from_statistics(&stats)
}

/// `X_k`: open edges `{a, b}` with `a in Lambda_k`, `b in Lambda_n \ Lambda_k` and
/// `0 <-> a within Lambda_k`. Edges to vertices outside the sampled box are not
/// visible; their expected number is added analytically by [`phi_profile`].
pub fn compute_xk(config: &Configuration, k: u32) -> Result<u64> {
    let lattice = config.lattice;
    if k >= lattice.n {
        return Err(Error::RadiusOutOfRange { k, n: lattice.n });
    }
    let norms = lattice.sup_norms();
    let mut dsu = DisjointSets::new(lattice.len());
    for e in &config.edges {
        if norms[e.a as usize] <= k && norms[e.b as usize] <= k {
            dsu.union(e.a, e.b);
        }
    }
    let root = dsu.find(lattice.origin_index() as u32);
    let mut count = 0;
    for e in &config.edges {
        let (na, nb) = (norms[e.a as usize], norms[e.b as usize]);
        let inner = match (na <= k, nb <= k) {
            (true, false) => e.a,
            (false, true) => e.b,
            _ => continue,
        };
        if dsu.find(inner) == root {
            count += 1;
        }
    }
    Ok(count)
}

/// `ext(x, k)` for all `x in Lambda_n` and `k in 0..=n`, zero where `x` is outside `Lambda_k`.
#[derive(Debug, Clone)]
pub struct ExteriorTable {
    len: usize,
    n: u32,
    values: Vec<f64>,
    /// Largest certified truncation error among the entries.
    pub error: f64,
}

/// Refuses tables beyond this many entries.
pub const MAX_EXTERIOR_TABLE: usize = 1 << 26;

impl ExteriorTable {
    pub fn new(spec: &KernelSpec, lattice: LatticeBox) -> Result<Self> {
        let len = lattice.len();
        let n = lattice.n;
        let size = len.checked_mul(n as usize + 1).filter(|&s| s <= MAX_EXTERIOR_TABLE);
        let size = size.ok_or_else(|| Error::Precondition(format!("exterior table for radius {n} in d = {} is too large", lattice.d)))?;
        let sums = ExteriorSums::new(spec, n)?;
        let mut values = vec![0.0; size];
        let mut error = 0.0f64;
        let norms = lattice.sup_norms();
        let mut x = vec![0i64; lattice.d];
        for v in 0..len {
            lattice.coords_into(v, &mut x);
            for k in norms[v]..=n {
                let w = sums.exterior_weight(&x, k)?;
                values[k as usize * len + v] = w.value;
                error = error.max(w.error);
            }
        }
        Ok(Self { len, n, values, error })
    }

    #[inline]
    pub fn get(&self, v: usize, k: u32) -> f64 {
        self.values[k as usize * self.len + v]
    }

    /// Row `ext(., k)` indexed by vertex.
    pub fn row(&self, k: u32) -> &[f64] {
        &self.values[k as usize * self.len..(k as usize + 1) * self.len]
    }

    pub fn radius(&self) -> u32 {
        self.n
    }

    /// `max_{a in Lambda_n} n^-1 * sum_{k = max(1, |a|)}^{n} ext(a, k)`: the
    /// smallest constant `c` with `n^-1 * sum_k phi(Lambda_k) <= c * E|K_0(Lambda_n)|`
    /// that follows from `P(0 <-> a in Lambda_k) <= t_a`.
    pub fn averaging_weight(&self, lattice: LatticeBox) -> f64 {
        let norms = lattice.sup_norms();
        (0..self.len).map(|v| (norms[v].max(1)..=self.n).map(|k| self.get(v, k)).sum::<f64>() / self.n as f64).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPoint {
    pub k: u32,
    pub phi: ObservableEstimate,
}

/// Independent check of `E[X_k] = phi(Lambda_k)` on the same replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XkSplit {
    pub k: u32,
    /// `E[X_k]` counting only exterior endpoints inside the sampled box.
    pub crossings: ObservableEstimate,
    /// `E[X_k + sum_{a in K_0(Lambda_k)} ext(a, n)]`.
    pub corrected: ObservableEstimate,
    /// Paired per-replica difference `corrected - phi`, expected mean 0.
    pub difference: ObservableEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiProfile {
    pub spec: KernelSpec,
    pub n: u32,
    pub replicas: u64,
    pub points: Vec<PhiPoint>,
    /// `min_k phi_hat(Lambda_k)` with a block-jackknife standard error.
    pub minimum: ObservableEstimate,
    pub argmin: u32,
    /// `n^-1 * sum_k phi_hat(Lambda_k)`
    pub average: ObservableEstimate,
    /// `E|K_0(Lambda_n)|`, present when the profile runs up to `k = n`.
    pub origin_cluster: Option<ObservableEstimate>,
    /// Averaging constant from [`ExteriorTable::averaging_weight`], divided by `f(n, alpha)`.
    pub averaging_constant: Option<f64>,
    pub f_n: Option<f64>,
    pub xk: Vec<XkSplit>,
    /// Largest certified error of the exterior weights used.
    pub exterior_error: f64,
}

/// Number of replica blocks for jackknife errors of non-linear statistics.
pub const JACKKNIFE_BLOCKS: u64 = 20;

/// `phi_hat(Lambda_k)` for `k = 1..=n` from configurations on `Lambda_n`, with
/// sub-box restriction done by one incremental union pass per replica.
pub fn phi_profile<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, n: u32, replicas: u64, master_seed: u64) -> Result<PhiProfile> {
    let lattice = LatticeBox::new(spec.d, n)?;
    let table = ExteriorTable::new(spec, lattice)?;
    phi_profile_with(exec, spec, lattice, n, &table, replicas, master_seed, true)
}

#[allow(clippy::too_many_arguments)]
pub fn phi_profile_with<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    lattice: LatticeBox,
    max_k: u32,
    table: &ExteriorTable,
    replicas: u64,
    master_seed: u64,
    with_xk: bool,
) -> Result<PhiProfile> {
    let n = lattice.n;
    if max_k == 0 || max_k > n {
        return Err(Error::RadiusOutOfRange { k: max_k, n });
    }
    if table.radius() != n {
        return Err(Error::Precondition("exterior table radius differs from the box".into()));
    }
    if replicas < 2 {
        return Err(Error::Precondition("phi estimation needs at least two replicas".into()));
    }
    let sampler = GroupedSampler::new(spec, lattice)?;
    let norms = lattice.sup_norms();
    let kk = max_k as usize;
    let blocks = JACKKNIFE_BLOCKS.min(replicas);
    struct Work {
        phi: Vec<MeanAccumulator>,
        xk: Vec<MeanAccumulator>,
        corrected: Vec<MeanAccumulator>,
        diff: Vec<MeanAccumulator>,
        origin: MeanAccumulator,
        block_sums: Vec<f64>,
        block_counts: Vec<u64>,
        edges: Vec<Edge>,
        scratch: SamplerScratch,
        walker: NestedClusterWalker,
        row: Vec<f64>,
    }
    let init = || Work {
        phi: vec![MeanAccumulator::new(); kk],
        xk: vec![MeanAccumulator::new(); kk],
        corrected: vec![MeanAccumulator::new(); kk],
        diff: vec![MeanAccumulator::new(); kk],
        origin: MeanAccumulator::new(),
        block_sums: vec![0.0; blocks as usize * kk],
        block_counts: vec![0; blocks as usize],
        edges: Vec::new(),
        scratch: SamplerScratch::default(),
        walker: NestedClusterWalker::new(),
        row: vec![0.0; kk],
    };
    let outer = table.row(n);
    let out = fold_replicas(
        exec,
        0..replicas,
        init,
        |w, r| {
            sampler.sample_edges_into(SeedSpec::new(master_seed, r), &mut w.edges, &mut w.scratch);
            let Work { phi, xk, corrected, diff, origin, row, walker, edges, .. } = w;
            walker.walk(lattice, edges, &norms, max_k, with_xk, |k, members, x| {
                if k == n {
                    origin.push(members.len() as f64);
                }
                let inner = table.row(k);
                let (mut p, mut c) = (0.0, 0.0);
                for &m in members {
                    p += inner[m as usize];
                    c += outer[m as usize];
                }
                let i = k as usize - 1;
                phi[i].push(p);
                row[i] = p;
                if with_xk && k < n {
                    let y = x as f64 + c;
                    xk[i].push(x as f64);
                    corrected[i].push(y);
                    diff[i].push(y - p);
                }
            });
            let block = (r * blocks / replicas) as usize;
            w.block_counts[block] += 1;
            for (s, v) in w.block_sums[block * kk..(block + 1) * kk].iter_mut().zip(&w.row) {
                *s += v;
            }
        },
        |acc, part| {
            for i in 0..kk {
                acc.phi[i].merge(&part.phi[i]);
                acc.xk[i].merge(&part.xk[i]);
                acc.corrected[i].merge(&part.corrected[i]);
                acc.diff[i].merge(&part.diff[i]);
            }
            acc.origin.merge(&part.origin);
            acc.block_sums.iter_mut().zip(&part.block_sums).for_each(|(a, b)| *a += b);
            acc.block_counts.iter_mut().zip(&part.block_counts).for_each(|(a, b)| *a += b);
        },
    );
    let points: Vec<PhiPoint> = (0..kk).map(|i| PhiPoint { k: i as u32 + 1, phi: out.phi[i].estimate(DefinitionTag::Phi { k: i as u32 + 1 }) }).collect();

    // block jackknife for the minimum and the average over k
    let bsum = |skip: Option<usize>, i: usize| -> (f64, u64) {
        let mut s = 0.0;
        let mut c = 0;
        for b in 0..blocks as usize {
            if Some(b) != skip {
                s += out.block_sums[b * kk + i];
                c += out.block_counts[b];
            }
        }
        (s, c)
    };
    let min_of = |skip: Option<usize>| -> Result<f64> {
        Ok((0..kk)
            .map(|i| {
                let (s, c) = bsum(skip, i);
                s / c as f64
            })
            .fold(f64::INFINITY, f64::min))
    };
    let avg_of = |skip: Option<usize>| -> Result<f64> {
        Ok((0..kk)
            .map(|i| {
                let (s, c) = bsum(skip, i);
                s / c as f64
            })
            .sum::<f64>()
            / kk as f64)
    };
    let (_, min_se) = jackknife(blocks as usize, min_of)?;
    let (_, avg_se) = jackknife(blocks as usize, avg_of)?;
    let argmin = points.iter().min_by(|a, b| a.phi.mean.total_cmp(&b.phi.mean)).map(|p| p.k).unwrap_or(1);
    let minimum = ObservableEstimate { mean: points[argmin as usize - 1].phi.mean, std_error: min_se, replicas, tag: DefinitionTag::PhiMinimum };
    let average = ObservableEstimate { mean: points.iter().map(|p| p.phi.mean).sum::<f64>() / kk as f64, std_error: avg_se, replicas, tag: DefinitionTag::PhiAverage };
    let xk = if with_xk {
        (0..kk.min(n as usize - 1))
            .map(|i| {
                let k = i as u32 + 1;
                XkSplit {
                    k,
                    crossings: out.xk[i].estimate(DefinitionTag::BoundaryCrossings { k }),
                    corrected: out.corrected[i].estimate(DefinitionTag::BoundaryCrossingsCorrected { k }),
                    difference: out.diff[i].estimate(DefinitionTag::BoundaryCrossingsCorrected { k }),
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let origin_cluster = (max_k == n).then(|| out.origin.estimate(DefinitionTag::OriginClusterMean));
    let f_n = if n >= 2 { Some(f_scaling(n as u64, spec.alpha)?) } else { None };
    let averaging_constant = f_n.map(|f| table.averaging_weight(lattice) / f);
    Ok(PhiProfile { spec: *spec, n, replicas, points, minimum, argmin, average, origin_cluster, averaging_constant, f_n, xk, exterior_error: table.error })
}

/// `phi_hat(Lambda_k)` from configurations sampled on `interior` (radius `>= k`).
pub fn estimate_phi<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, k: u32, interior: LatticeBox, replicas: u64, master_seed: u64) -> Result<ObservableEstimate> {
    if k > interior.n {
        return Err(Error::RadiusOutOfRange { k, n: interior.n });
    }
    if k == 0 {
        let w = ExteriorSums::new(spec, 0)?.exterior_weight(&vec![0; spec.d], 0)?;
        return Ok(ObservableEstimate { mean: w.value, std_error: 0.0, replicas, tag: DefinitionTag::Phi { k: 0 } });
    }
    let table = ExteriorTable::new(spec, interior)?;
    let profile = phi_profile_with(exec, spec, interior, k, &table, replicas, master_seed, false)?;
    Ok(profile.points[k as usize - 1].phi)
}
