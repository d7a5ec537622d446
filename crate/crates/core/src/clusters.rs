//! Connected components of configurations: full partitions, clusters of the
//! origin restricted to sub-boxes, largest-cluster sizes and the typical value
//! `M_beta(Lambda) = min { m >= 0 : P(|K_max(Lambda)| >= m) <= 1/e }`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::exec::{fold_replicas, Executor};
use crate::kernel::{KernelSpec, LatticeBox};
use crate::rng::SeedSpec;
use crate::sampler::{Configuration, Edge, GroupedSampler, SamplerScratch};
use crate::stats::wilson_interval;
use crate::{Error, Result};

/// Union-find with path halving and union by size.
#[derive(Debug, Clone, Default)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    pub fn new(len: usize) -> Self {
        let mut s = Self::default();
        s.reset(len);
        s
    }

    /// Back to `len` singletons, reusing the allocation.
    pub fn reset(&mut self, len: usize) {
        self.parent.clear();
        self.parent.extend(0..len as u32);
        self.size.clear();
        self.size.resize(len, 1);
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the new root, or `None` if they
    /// were already joined. Ties keep the smaller index as root.
    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> Option<(u32, u32)> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (big, small) = match self.size[ra as usize].cmp(&self.size[rb as usize]) {
            core::cmp::Ordering::Greater => (ra, rb),
            core::cmp::Ordering::Less => (rb, ra),
            core::cmp::Ordering::Equal => (ra.min(rb), ra.max(rb)),
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        Some((big, small))
    }

    #[inline]
    pub fn set_size(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.size[r as usize]
    }
}

/// Disjoint-set decomposition of a configuration, fully compressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    pub lattice: LatticeBox,
    /// Root of every vertex.
    roots: Vec<u32>,
    /// Component size, valid at root indices.
    sizes: Vec<u32>,
    origin_root: u32,
}

impl ClusterPartition {
    pub fn root(&self, v: usize) -> u32 {
        self.roots[v]
    }

    pub fn component_size(&self, v: usize) -> u32 {
        self.sizes[self.roots[v] as usize]
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.roots[a] == self.roots[b]
    }

    /// `|K_0(Lambda_n)|`
    pub fn origin_cluster_size(&self) -> u32 {
        self.sizes[self.origin_root as usize]
    }

    pub fn in_origin_cluster(&self, v: usize) -> bool {
        self.roots[v] == self.origin_root
    }

    /// Sizes of all components, ordered by root index.
    pub fn component_sizes(&self) -> Vec<u32> {
        (0..self.roots.len()).filter(|&v| self.roots[v] as usize == v).map(|v| self.sizes[v]).collect()
    }
}

pub fn build_partition(config: &Configuration) -> Result<ClusterPartition> {
    let len = config.lattice.len();
    let mut dsu = DisjointSets::new(len);
    for e in &config.edges {
        if e.a as usize >= len || e.b as usize >= len {
            return Err(Error::EndpointOutsideBox { index: e.a.max(e.b) as u64, len: len as u64 });
        }
        dsu.union(e.a, e.b);
    }
    Ok(partition_from_forest(config.lattice, &mut dsu))
}

fn partition_from_forest(lattice: LatticeBox, dsu: &mut DisjointSets) -> ClusterPartition {
    let roots: Vec<u32> = (0..dsu.len() as u32).map(|v| dsu.find(v)).collect();
    let origin_root = roots[lattice.origin_index()];
    ClusterPartition { lattice, roots, sizes: dsu.size.clone(), origin_root }
}

/// `|K_max|`. Only the cardinality is defined; ties do not matter.
pub fn largest_cluster_size(partition: &ClusterPartition) -> u32 {
    partition.component_sizes().into_iter().max().unwrap_or(0)
}

/// `|K_0(Lambda_k)|`: size of the origin's cluster using only edges with both
/// endpoints in `Lambda_k`. A fresh union pass over the filtered edge list.
pub fn restricted_cluster_size(config: &Configuration, k: u32) -> Result<u32> {
    let lattice = config.lattice;
    if k > lattice.n {
        return Err(Error::RadiusOutOfRange { k, n: lattice.n });
    }
    let mut dsu = DisjointSets::new(lattice.len());
    for e in &config.edges {
        if lattice.sup_norm_of_index(e.a as usize) <= k && lattice.sup_norm_of_index(e.b as usize) <= k {
            dsu.union(e.a, e.b);
        }
    }
    Ok(dsu.set_size(lattice.origin_index() as u32))
}

/// Walks the nested clusters `K_0(Lambda_1) ⊆ K_0(Lambda_2) ⊆ ...` of one
/// configuration in a single incremental union pass: edges are bucketed by
/// `max(|a|, |b|)` so the edges inside `Lambda_k` are exactly the buckets up to `k`.
/// Member lists are kept as circular linked lists so the origin's cluster can
/// be listed in time proportional to its size.
#[derive(Debug, Default)]
pub struct NestedClusterWalker {
    dsu: DisjointSets,
    next: Vec<u32>,
    bucket_start: Vec<u32>,
    bucketed: Vec<Edge>,
    adj_start: Vec<u32>,
    adj: Vec<u32>,
    members: Vec<u32>,
}

impl NestedClusterWalker {
    pub fn new() -> Self {
        Self::default()
    }

    /// For `k = 1..=max_k`, calls `visit(k, members of K_0(Lambda_k), X_k)`.
    /// `X_k` counts open edges `{a, b}` with `a in K_0(Lambda_k)` and
    /// `b in Lambda_n \ Lambda_k`; it is only computed when `with_xk` is set.
    pub fn walk<F>(&mut self, lattice: LatticeBox, edges: &[Edge], sup_norms: &[u32], max_k: u32, with_xk: bool, mut visit: F)
    where
        F: FnMut(u32, &[u32], u64),
    {
        let len = lattice.len();
        let levels = lattice.n as usize + 1;
        self.dsu.reset(len);
        self.next.clear();
        self.next.extend(0..len as u32);

        // counting sort of edges by level
        self.bucket_start.clear();
        self.bucket_start.resize(levels + 1, 0);
        for e in edges {
            let level = sup_norms[e.a as usize].max(sup_norms[e.b as usize]) as usize;
            self.bucket_start[level + 1] += 1;
        }
        for l in 0..levels {
            self.bucket_start[l + 1] += self.bucket_start[l];
        }
        self.bucketed.clear();
        self.bucketed.resize(edges.len(), Edge { a: 0, b: 0 });
        {
            let mut fill: Vec<u32> = self.bucket_start[..levels].to_vec();
            for e in edges {
                let level = sup_norms[e.a as usize].max(sup_norms[e.b as usize]) as usize;
                self.bucketed[fill[level] as usize] = *e;
                fill[level] += 1;
            }
        }

        if with_xk {
            self.adj_start.clear();
            self.adj_start.resize(len + 1, 0);
            for e in edges {
                self.adj_start[e.a as usize + 1] += 1;
                self.adj_start[e.b as usize + 1] += 1;
            }
            for v in 0..len {
                self.adj_start[v + 1] += self.adj_start[v];
            }
            self.adj.clear();
            self.adj.resize(2 * edges.len(), 0);
            let mut fill: Vec<u32> = self.adj_start[..len].to_vec();
            for e in edges {
                self.adj[fill[e.a as usize] as usize] = e.b;
                fill[e.a as usize] += 1;
                self.adj[fill[e.b as usize] as usize] = e.a;
                fill[e.b as usize] += 1;
            }
        }

        let origin = lattice.origin_index() as u32;
        for k in 1..=max_k.min(lattice.n) {
            let (lo, hi) = (self.bucket_start[k as usize] as usize, self.bucket_start[k as usize + 1] as usize);
            for i in lo..hi {
                let e = self.bucketed[i];
                if let Some((big, small)) = self.dsu.union(e.a, e.b) {
                    self.next.swap(big as usize, small as usize);
                }
            }
            self.members.clear();
            let mut v = origin;
            loop {
                self.members.push(v);
                v = self.next[v as usize];
                if v == origin {
                    break;
                }
            }
            let mut xk = 0u64;
            if with_xk {
                for &a in &self.members {
                    let (s, t) = (self.adj_start[a as usize] as usize, self.adj_start[a as usize + 1] as usize);
                    xk += self.adj[s..t].iter().filter(|&&b| sup_norms[b as usize] > k).count() as u64;
                }
            }
            visit(k, &self.members, xk);
        }
    }
}

/// Histogram of a positive integer statistic (cluster sizes), index = size.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SizeHistogram {
    pub counts: Vec<u64>,
}

impl SizeHistogram {
    pub fn with_max(max: usize) -> Self {
        Self { counts: vec![0; max + 1] }
    }

    pub fn record(&mut self, size: u32) {
        let s = size as usize;
        if s >= self.counts.len() {
            self.counts.resize(s + 1, 0);
        }
        self.counts[s] += 1;
    }

    pub fn merge(&mut self, other: &SizeHistogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of samples with value `>= m`.
    pub fn count_at_least(&self, m: u64) -> u64 {
        let m = m as usize;
        if m >= self.counts.len() {
            return 0;
        }
        self.counts[m..].iter().sum()
    }

    /// Empirical `P(X >= m)`.
    pub fn survival(&self, m: u64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.count_at_least(m) as f64 / total as f64
    }

    pub fn max_value(&self) -> u64 {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0) as u64
    }

    /// `(size, count)` rows with non-zero count.
    pub fn rows(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(s, &c)| (s as u64, c))
    }
}

pub const INV_E: f64 = 0.367_879_441_171_442_33;

/// z-score for the Wilson interval reported with quantile estimates.
pub const QUANTILE_Z: f64 = 3.0;

/// Estimated typical value of `|K_max|`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileEstimate {
    pub m_hat: u64,
    /// Smallest `m` whose Wilson interval for `P(|K_max| >= m)` reaches below `1/e`.
    pub m_low: u64,
    /// Smallest `m` whose Wilson interval lies entirely at or below `1/e`
    /// (the pessimistic edge for upper-bound checks).
    pub m_high: u64,
    pub samples: u64,
    pub confidence: String,
}

/// `min { m >= 0 : S(m) <= 1/e }` read directly off an empirical survival function.
pub fn typical_value_from_histogram(hist: &SizeHistogram) -> QuantileEstimate {
    let total = hist.total();
    let first = |pred: &dyn Fn(u64) -> bool| (0..=hist.max_value() + 1).find(|&m| pred(m)).unwrap_or(hist.max_value() + 1);
    let m_hat = first(&|m| hist.survival(m) <= INV_E);
    let m_low = first(&|m| wilson_interval(hist.count_at_least(m), total, QUANTILE_Z).0 <= INV_E);
    let m_high = first(&|m| wilson_interval(hist.count_at_least(m), total, QUANTILE_Z).1 <= INV_E);
    QuantileEstimate { m_hat, m_low, m_high, samples: total, confidence: format!("Wilson score interval, z = {QUANTILE_Z}, on P(|K_max| >= m)") }
}

/// `M_beta` for an exact distribution `probabilities[s] = P(X = s)`.
pub fn typical_value_exact(probabilities: &[f64]) -> u64 {
    let mut survival = 0.0;
    let mut m = probabilities.len() as u64;
    // scan downwards: the answer is one past the last m with S(m) > 1/e
    for s in (0..probabilities.len()).rev() {
        survival += probabilities[s];
        if survival > INV_E {
            return s as u64 + 1;
        }
        m = s as u64;
    }
    m
}

/// Largest-cluster and origin-cluster size histograms over replicas.
#[derive(Debug, Clone, Default)]
pub struct ClusterSizeSample {
    pub largest: SizeHistogram,
    pub origin: SizeHistogram,
}

/// Samples `|K_max(Lambda)|` and `|K_0(Lambda)|` on replicas `replicas` of `master_seed`.
pub fn sample_cluster_sizes<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    lattice: LatticeBox,
    replicas: core::ops::Range<u64>,
    master_seed: u64,
) -> Result<ClusterSizeSample> {
    let sampler = GroupedSampler::new(spec, lattice)?;
    let len = lattice.len();
    let origin = lattice.origin_index() as u32;
    struct Work {
        sample: ClusterSizeSample,
        edges: Vec<Edge>,
        scratch: SamplerScratch,
        dsu: DisjointSets,
    }
    let out = fold_replicas(
        exec,
        replicas,
        || Work { sample: ClusterSizeSample::default(), edges: Vec::new(), scratch: SamplerScratch::default(), dsu: DisjointSets::default() },
        |w, r| {
            sampler.sample_edges_into(SeedSpec::new(master_seed, r), &mut w.edges, &mut w.scratch);
            w.dsu.reset(len);
            let mut largest = 1;
            for e in &w.edges {
                if let Some((big, _)) = w.dsu.union(e.a, e.b) {
                    largest = largest.max(w.dsu.size[big as usize]);
                }
            }
            w.sample.largest.record(largest);
            let o = w.dsu.set_size(origin);
            w.sample.origin.record(o);
        },
        |acc, part| {
            acc.sample.largest.merge(&part.sample.largest);
            acc.sample.origin.merge(&part.sample.origin);
        },
    );
    Ok(out.sample)
}

pub const MIN_QUANTILE_REPLICAS: u64 = 100;

/// Estimates `M_beta(Lambda)` from `replicas` independent configurations.
pub fn estimate_typical_value<E: Executor + ?Sized>(
    exec: &E,
    spec: &KernelSpec,
    lattice: LatticeBox,
    replicas: u64,
    master_seed: u64,
) -> Result<(QuantileEstimate, SizeHistogram)> {
    if replicas < MIN_QUANTILE_REPLICAS {
        return Err(Error::Precondition(format!("typical-value estimation needs at least {MIN_QUANTILE_REPLICAS} replicas, got {replicas}")));
    }
    let sample = sample_cluster_sizes(exec, spec, lattice, 0..replicas, master_seed)?;
    Ok((typical_value_from_histogram(&sample.largest), sample.largest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::sampler::sample_grouped;
    use proptest::prelude::*;

    fn d1(n: u32, pairs: &[(i64, i64)]) -> Configuration {
        let bx = LatticeBox::new(1, n).unwrap();
        let spec = KernelSpec::new(1, 0.5, 1.0).unwrap();
        let owned: Vec<([i64; 1], [i64; 1])> = pairs.iter().map(|&(a, b)| ([a], [b])).collect();
        let refs: Vec<(&[i64], &[i64])> = owned.iter().map(|(a, b)| (&a[..], &b[..])).collect();
        Configuration::from_points(bx, spec, &refs, SeedSpec::default()).unwrap()
    }

    #[test]
    fn empty_configuration_is_all_singletons() {
        let p = build_partition(&d1(1, &[])).unwrap();
        assert_eq!(p.origin_cluster_size(), 1);
        assert_eq!(largest_cluster_size(&p), 1);
        assert_eq!(p.component_sizes(), [1, 1, 1]);
    }

    #[test]
    fn complete_graph_on_lambda_one() {
        let p = build_partition(&d1(1, &[(-1, 0), (0, 1), (-1, 1)])).unwrap();
        assert_eq!(p.component_sizes(), [3]);
        assert_eq!(largest_cluster_size(&p), 3);
    }

    #[test]
    fn single_edge() {
        let cfg = d1(1, &[(-1, 0)]);
        let p = build_partition(&cfg).unwrap();
        assert_eq!(p.origin_cluster_size(), 2);
        assert!(p.connected(0, 1) && !p.connected(1, 2));
        assert_eq!(restricted_cluster_size(&cfg, 1).unwrap(), 2);
    }

    #[test]
    fn restriction_drops_paths_leaving_the_sub_box() {
        let cfg = d1(2, &[(0, 2), (2, 1)]);
        assert_eq!(restricted_cluster_size(&cfg, 1).unwrap(), 1);
        assert_eq!(restricted_cluster_size(&cfg, 2).unwrap(), 3);
        assert_eq!(restricted_cluster_size(&cfg, 0).unwrap(), 1);
        assert!(matches!(restricted_cluster_size(&cfg, 3), Err(Error::RadiusOutOfRange { .. })));
    }

    #[test]
    fn largest_of_two_pairs() {
        // sizes {2, 2, 1} on 5 vertices
        let p = build_partition(&d1(2, &[(-2, -1), (1, 2)])).unwrap();
        assert_eq!(largest_cluster_size(&p), 2);
    }

    #[test]
    fn typical_value_definition() {
        let mut h = SizeHistogram::default();
        // 60 samples of 1, 40 of 3: S(2) = S(3) = 0.4 > 1/e, S(4) = 0
        for _ in 0..60 {
            h.record(1);
        }
        for _ in 0..40 {
            h.record(3);
        }
        let q = typical_value_from_histogram(&h);
        assert_eq!(q.m_hat, 4);
        assert!(h.survival(q.m_hat) <= INV_E && h.survival(q.m_hat - 1) > INV_E);
        assert!(q.m_low <= q.m_hat && q.m_hat <= q.m_high);
        assert_eq!(typical_value_exact(&[0.0, 0.6, 0.0, 0.4]), 4);
        assert_eq!(typical_value_exact(&[0.0, 0.7, 0.3]), 2);
    }

    #[test]
    fn typical_value_at_extremes() {
        let bx = LatticeBox::new(1, 3).unwrap();
        let zero = KernelSpec::new(1, 0.5, 0.0).unwrap();
        let (q, _) = estimate_typical_value(&Sequential, &zero, bx, 200, 1).unwrap();
        // all clusters are singletons: S(1) = 1, S(2) = 0
        assert_eq!(q.m_hat, 2);
        let full = KernelSpec::new(1, 0.5, 1e6).unwrap();
        let (q, _) = estimate_typical_value(&Sequential, &full, bx, 200, 1).unwrap();
        assert_eq!(q.m_hat, bx.len() as u64 + 1);
        assert!(estimate_typical_value(&Sequential, &full, bx, 99, 1).is_err());
    }

    #[test]
    fn walker_agrees_with_fresh_restricted_passes() {
        let spec = KernelSpec::new(2, 0.7, 1.5).unwrap();
        let bx = LatticeBox::new(2, 5).unwrap();
        let norms = bx.sup_norms();
        let mut walker = NestedClusterWalker::new();
        for r in 0..20 {
            let cfg = sample_grouped(&spec, bx, SeedSpec::new(3, r)).unwrap();
            let mut sizes = Vec::new();
            walker.walk(bx, &cfg.edges, &norms, bx.n, true, |k, members, xk| {
                sizes.push((k, members.len() as u32, xk));
            });
            for (k, size, xk) in sizes {
                assert_eq!(size, restricted_cluster_size(&cfg, k).unwrap());
                // brute-force X_k from a partition of the sub-box
                let sub: Vec<Edge> = cfg.edges.iter().copied().filter(|e| norms[e.a as usize] <= k && norms[e.b as usize] <= k).collect();
                let sub_cfg = Configuration { edges: sub, ..cfg.clone() };
                let p = build_partition(&sub_cfg).unwrap();
                let brute = cfg
                    .edges
                    .iter()
                    .filter(|e| {
                        let (na, nb) = (norms[e.a as usize], norms[e.b as usize]);
                        (na <= k && nb > k && p.in_origin_cluster(e.a as usize)) || (nb <= k && na > k && p.in_origin_cluster(e.b as usize))
                    })
                    .count() as u64;
                if k < bx.n {
                    assert_eq!(xk, brute, "k = {k}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_invariants(seed in 0u64..1000, beta in 0.0f64..3.0, extra in proptest::collection::vec((0u32..49, 0u32..49), 0..5)) {
            let spec = KernelSpec::new(2, 0.8, beta).unwrap();
            let bx = LatticeBox::new(2, 3).unwrap();
            let cfg = sample_grouped(&spec, bx, SeedSpec::new(seed, 0)).unwrap();
            let p = build_partition(&cfg).unwrap();
            prop_assert_eq!(p.component_sizes().iter().map(|&s| s as usize).sum::<usize>(), bx.len());
            prop_assert_eq!(p.origin_cluster_size(), restricted_cluster_size(&cfg, bx.n).unwrap());
            let sizes: Vec<u32> = (0..=bx.n).map(|k| restricted_cluster_size(&cfg, k).unwrap()).collect();
            prop_assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
            // adding edges never shrinks K_0 or K_max
            let mut edges = cfg.edges.clone();
            for (a, b) in extra {
                let e = Edge::new(a, b);
                if a != b && !edges.contains(&e) {
                    edges.push(e);
                }
            }
            let bigger = Configuration::new(bx, spec, edges, cfg.seed).unwrap();
            let q = build_partition(&bigger).unwrap();
            prop_assert!(q.origin_cluster_size() >= p.origin_cluster_size());
            prop_assert!(largest_cluster_size(&q) >= largest_cluster_size(&p));
        }
    }
}
