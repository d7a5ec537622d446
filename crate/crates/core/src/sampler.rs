//! Sampling independent percolation configurations on `Lambda_n`.
//!
//! [`GroupedSampler`] is the default path: pairs with the same displacement
//! share one probability, so each displacement class draws a binomial count
//! and places that many edges uniformly without replacement among its
//! positions. [`sample_naive`] flips one coin per pair and is kept as the
//! reference path.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::kernel::{KernelSpec, LatticeBox, MAX_DIM};
use crate::math::CompensatedSum;
use crate::rng::SeedSpec;
use crate::{Error, Result};

/// An open edge `{a, b}` between vertex indices, with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
}

impl Edge {
    pub fn new(x: u32, y: u32) -> Self {
        if x <= y {
            Self { a: x, b: y }
        } else {
            Self { a: y, b: x }
        }
    }
}

/// One sampled set of open edges inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub lattice: LatticeBox,
    pub spec: KernelSpec,
    /// Sorted, without duplicates or self-loops.
    pub edges: Vec<Edge>,
    pub seed: SeedSpec,
}

impl Configuration {
    /// Validates and canonicalises (sorts) an edge list.
    pub fn new(lattice: LatticeBox, spec: KernelSpec, mut edges: Vec<Edge>, seed: SeedSpec) -> Result<Self> {
        if lattice.d != spec.d {
            return Err(Error::InvalidSpec(format!("box dimension {} differs from model dimension {}", lattice.d, spec.d)));
        }
        let len = lattice.len() as u64;
        for e in &mut edges {
            *e = Edge::new(e.a, e.b);
            if e.b as u64 >= len {
                return Err(Error::EndpointOutsideBox { index: e.b as u64, len });
            }
            if e.a == e.b {
                return Err(Error::Precondition(format!("self-loop at vertex {}", e.a)));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Precondition(format!("duplicate edge {{{}, {}}}", w[0].a, w[0].b)));
        }
        Ok(Self { lattice, spec, edges, seed })
    }

    pub fn from_points(lattice: LatticeBox, spec: KernelSpec, pairs: &[(&[i64], &[i64])], seed: SeedSpec) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len());
        for (x, y) in pairs {
            let ix = lattice.index_of(x).ok_or_else(|| Error::EndpointOutsideBox { index: u64::MAX, len: lattice.len() as u64 })?;
            let iy = lattice.index_of(y).ok_or_else(|| Error::EndpointOutsideBox { index: u64::MAX, len: lattice.len() as u64 })?;
            edges.push(Edge::new(ix as u32, iy as u32));
        }
        Self::new(lattice, spec, edges, seed)
    }
}

/// Pairs with displacement `offset` (first nonzero coordinate positive).
#[derive(Debug, Clone)]
pub struct DisplacementClass {
    pub offset: [i64; MAX_DIM],
    /// Number of vertex pairs in the box with this displacement.
    pub multiplicity: u64,
    pub probability: f64,
    /// Index difference `idx(x + offset) - idx(x)`.
    index_offset: u64,
    binomial: Option<Binomial>,
}

impl DisplacementClass {
    pub fn offset(&self, d: usize) -> &[i64] {
        &self.offset[..d]
    }
}

/// All displacement classes of a box, in a fixed order (row-major over the
/// displacement cube `[-2n, 2n]^d`, half-space only).
pub fn displacement_classes(spec: &KernelSpec, lattice: LatticeBox) -> Result<Vec<DisplacementClass>> {
    spec.validate()?;
    let d = lattice.d;
    let cube = LatticeBox::new(d, 2 * lattice.n)?;
    let side = lattice.side() as i64;
    let mut classes = Vec::new();
    let mut v = [0i64; MAX_DIM];
    for i in cube.origin_index() + 1..cube.len() {
        // indices above the centre are exactly the lexicographically positive offsets
        cube.coords_into(i, &mut v);
        let multiplicity: u64 = v[..d].iter().map(|c| (side - c.abs()) as u64).product();
        let probability = spec.displacement_probability(&v[..d]);
        let index_offset = v[..d].iter().fold(0i64, |acc, &c| acc * side + c) as u64;
        let binomial = if probability > 0.0 { Some(Binomial::new(multiplicity, probability).map_err(|e| Error::InvalidSpec(format!("{e}")))?) } else { None };
        classes.push(DisplacementClass { offset: v, multiplicity, probability, index_offset, binomial });
    }
    Ok(classes)
}

/// Exact expected number of open edges in the box, `sum_v m_v p_v`.
pub fn expected_edge_count(spec: &KernelSpec, lattice: LatticeBox) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for c in displacement_classes(spec, lattice)? {
        acc.add(c.multiplicity as f64 * c.probability);
    }
    Ok(acc.value())
}

/// Prepared displacement-grouped sampler for one `(spec, box)`.
#[derive(Debug, Clone)]
pub struct GroupedSampler {
    spec: KernelSpec,
    lattice: LatticeBox,
    classes: Vec<DisplacementClass>,
}

/// Reusable buffers for [`GroupedSampler::sample_edges_into`].
#[derive(Debug, Default)]
pub struct SamplerScratch {
    shuffle: Vec<u32>,
    chosen: BTreeSet<u64>,
}

impl GroupedSampler {
    pub fn new(spec: &KernelSpec, lattice: LatticeBox) -> Result<Self> {
        if lattice.d != spec.d {
            return Err(Error::InvalidSpec(format!("box dimension {} differs from model dimension {}", lattice.d, spec.d)));
        }
        Ok(Self { spec: *spec, lattice, classes: displacement_classes(spec, lattice)? })
    }

    pub fn lattice(&self) -> LatticeBox {
        self.lattice
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn classes(&self) -> &[DisplacementClass] {
        &self.classes
    }

    pub fn sample(&self, seed: SeedSpec) -> Configuration {
        let mut edges = Vec::new();
        self.sample_edges_into(seed, &mut edges, &mut SamplerScratch::default());
        edges.sort_unstable();
        Configuration { lattice: self.lattice, spec: self.spec, edges, seed }
    }

    /// Fills `edges` (cleared first) with the open edges of replica `seed`, in
    /// class order. Deterministic in `seed`; not sorted.
    pub fn sample_edges_into(&self, seed: SeedSpec, edges: &mut Vec<Edge>, scratch: &mut SamplerScratch) {
        edges.clear();
        let base = seed.stream(0);
        for (class_index, class) in self.classes.iter().enumerate() {
            let Some(binomial) = &class.binomial else { continue };
            let mut rng = base.clone();
            rng.set_stream(class_index as u64);
            let count = binomial.sample(&mut rng);
            if count == 0 {
                continue;
            }
            self.place(class, count, &mut rng, edges, scratch);
        }
    }

    fn place(&self, class: &DisplacementClass, count: u64, rng: &mut ChaCha8Rng, edges: &mut Vec<Edge>, scratch: &mut SamplerScratch) {
        let m = class.multiplicity;
        if count * 8 <= m {
            scratch.chosen.clear();
            while (scratch.chosen.len() as u64) < count {
                let pos = rng.random_range(0..m);
                if scratch.chosen.insert(pos) {
                    edges.push(self.edge_at(class, pos));
                }
            }
        } else {
            let shuffle = &mut scratch.shuffle;
            shuffle.clear();
            shuffle.extend(0..m as u32);
            for i in 0..count as usize {
                let j = rng.random_range(i..m as usize);
                shuffle.swap(i, j);
                edges.push(self.edge_at(class, shuffle[i] as u64));
            }
        }
    }

    /// The `pos`-th pair (row-major over admissible lower endpoints) of a class.
    #[inline]
    fn edge_at(&self, class: &DisplacementClass, mut pos: u64) -> Edge {
        let d = self.lattice.d;
        let side = self.lattice.side() as u64;
        let mut stride = 1u64;
        let mut index = 0u64;
        for i in (0..d).rev() {
            let v = class.offset[i];
            let range = side - v.unsigned_abs();
            let digit = pos % range;
            pos /= range;
            // shifted coordinate x_i + n of the lower endpoint
            let shifted = digit + if v < 0 { v.unsigned_abs() } else { 0 };
            index += shifted * stride;
            stride *= side;
        }
        Edge { a: index as u32, b: (index + class.index_offset) as u32 }
    }
}

/// Default sampler entry point.
pub fn sample_grouped(spec: &KernelSpec, lattice: LatticeBox, seed: SeedSpec) -> Result<Configuration> {
    Ok(GroupedSampler::new(spec, lattice)?.sample(seed))
}

/// Default cap on the number of vertex pairs visited by [`sample_naive`].
pub const DEFAULT_PAIR_CAP: u64 = 50_000_000;

/// One independent coin per unordered pair. Reference path for the grouped sampler.
pub fn sample_naive(spec: &KernelSpec, lattice: LatticeBox, seed: SeedSpec, pair_cap: u64) -> Result<Configuration> {
    let sampler = NaiveSampler::new(spec, lattice, pair_cap)?;
    let mut edges = Vec::new();
    sampler.sample_edges_into(seed, &mut edges);
    Ok(Configuration { lattice, spec: *spec, edges, seed })
}

/// [`sample_naive`] with the per-displacement probability table prepared once.
#[derive(Debug, Clone)]
pub struct NaiveSampler {
    lattice: LatticeBox,
    /// probability over the displacement cube [-2n, 2n]^d
    table: Vec<f64>,
}

impl NaiveSampler {
    pub fn new(spec: &KernelSpec, lattice: LatticeBox, pair_cap: u64) -> Result<Self> {
        spec.validate()?;
        if lattice.d != spec.d {
            return Err(Error::InvalidSpec(format!("box dimension {} differs from model dimension {}", lattice.d, spec.d)));
        }
        let len = lattice.len() as u64;
        let pairs = len * (len - 1) / 2;
        if pairs > pair_cap {
            return Err(Error::PairCapExceeded { pairs, cap: pair_cap });
        }
        let cube = LatticeBox::new(lattice.d, 2 * lattice.n)?;
        let mut v = [0i64; MAX_DIM];
        let table = (0..cube.len())
            .map(|i| {
                cube.coords_into(i, &mut v);
                spec.displacement_probability(&v[..lattice.d])
            })
            .collect();
        Ok(Self { lattice, table })
    }

    /// Edges in sorted order.
    pub fn sample_edges_into(&self, seed: SeedSpec, edges: &mut Vec<Edge>) {
        edges.clear();
        let d = self.lattice.d;
        let len = self.lattice.len();
        let n2 = 2 * self.lattice.n as i64;
        let cube_side = 2 * n2 + 1;
        let mut rng = seed.stream(u64::MAX);
        let mut x = [0i64; MAX_DIM];
        let mut y = [0i64; MAX_DIM];
        for a in 0..len {
            self.lattice.coords_into(a, &mut x);
            for b in a + 1..len {
                self.lattice.coords_into(b, &mut y);
                let cube_index = (0..d).fold(0i64, |acc, i| acc * cube_side + (y[i] - x[i] + n2)) as usize;
                let p = self.table[cube_index];
                let u: f64 = rng.random();
                if u < p {
                    edges.push(Edge { a: a as u32, b: b as u32 });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    fn spec(d: usize, alpha: f64, beta: f64) -> KernelSpec {
        KernelSpec::new(d, alpha, beta).unwrap()
    }

    #[test]
    fn zero_beta_gives_no_edges() {
        let s = spec(2, 0.5, 0.0);
        let bx = LatticeBox::new(2, 3).unwrap();
        assert!(sample_grouped(&s, bx, SeedSpec::new(1, 0)).unwrap().edges.is_empty());
        assert!(sample_naive(&s, bx, SeedSpec::new(1, 0), DEFAULT_PAIR_CAP).unwrap().edges.is_empty());
        assert_eq!(expected_edge_count(&s, bx).unwrap(), 0.0);
    }

    #[test]
    fn class_multiplicities_count_all_pairs() {
        for (d, n) in [(1, 3), (2, 2), (3, 1)] {
            let bx = LatticeBox::new(d, n).unwrap();
            let classes = displacement_classes(&spec(d, 0.5, 1.0), bx).unwrap();
            let total: u64 = classes.iter().map(|c| c.multiplicity).sum();
            let len = bx.len() as u64;
            assert_eq!(total, len * (len - 1) / 2);
        }
    }

    #[test]
    fn every_position_maps_to_a_distinct_valid_pair() {
        let s = spec(2, 0.5, 1.0);
        let bx = LatticeBox::new(2, 2).unwrap();
        let sampler = GroupedSampler::new(&s, bx).unwrap();
        let mut all = BTreeSet::new();
        for class in sampler.classes() {
            for pos in 0..class.multiplicity {
                let e = sampler.edge_at(class, pos);
                let (x, y) = (bx.coords(e.a as usize), bx.coords(e.b as usize));
                let diff: Vec<i64> = x.iter().zip(&y).map(|(a, b)| b - a).collect();
                assert_eq!(diff, class.offset(2));
                assert!(all.insert(e));
            }
        }
        assert_eq!(all.len(), 25 * 24 / 2);
    }

    #[test]
    fn huge_beta_opens_everything() {
        let s = spec(1, 0.5, 50.0);
        let bx = LatticeBox::new(1, 1).unwrap();
        let all_open = (0..1000).filter(|&r| sample_grouped(&s, bx, SeedSpec::new(3, r)).unwrap().edges.len() == 3).count();
        // P(all open) = (1 - e^-50)^2 (1 - e^{-50/2^1.5}) > 0.999
        assert!(all_open >= 998);
    }

    #[test]
    fn expected_edge_count_closed_form() {
        let s = spec(1, 0.5, 1.0);
        let got = expected_edge_count(&s, LatticeBox::new(1, 1).unwrap()).unwrap();
        let p1 = 1.0 - (-1.0f64).exp();
        let p2 = 1.0 - (-(2.0f64).powf(-1.5)).exp();
        assert!((got - (2.0 * p1 + p2)).abs() < 1e-15);
        assert!((got - 1.562_052_616_330_556).abs() < 1e-14);
        let counts: Vec<f64> = (1..6).map(|n| expected_edge_count(&s, LatticeBox::new(1, n).unwrap()).unwrap()).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec(2, 0.8, 1.0);
        let bx = LatticeBox::new(2, 6).unwrap();
        let a = sample_grouped(&s, bx, SeedSpec::new(11, 5)).unwrap();
        let b = sample_grouped(&s, bx, SeedSpec::new(11, 5)).unwrap();
        let c = sample_grouped(&s, bx, SeedSpec::new(11, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.edges, c.edges);
    }

    #[test]
    fn configurations_are_valid() {
        let s = spec(2, 0.3, 3.0);
        let bx = LatticeBox::new(2, 4).unwrap();
        let cfg = sample_grouped(&s, bx, SeedSpec::new(2, 0)).unwrap();
        let checked = Configuration::new(bx, s, cfg.edges.clone(), cfg.seed).unwrap();
        assert_eq!(checked, cfg);
    }

    #[test]
    fn configuration_rejects_bad_edges() {
        let s = spec(1, 0.5, 1.0);
        let bx = LatticeBox::new(1, 1).unwrap();
        let seed = SeedSpec::default();
        assert!(matches!(Configuration::new(bx, s, vec![Edge::new(0, 3)], seed), Err(Error::EndpointOutsideBox { .. })));
        assert!(Configuration::new(bx, s, vec![Edge::new(1, 1)], seed).is_err());
        assert!(Configuration::new(bx, s, vec![Edge::new(0, 1), Edge::new(1, 0)], seed).is_err());
    }

    #[test]
    fn naive_rejects_boxes_over_the_pair_cap() {
        let s = spec(2, 0.5, 1.0);
        let bx = LatticeBox::new(2, 10).unwrap();
        assert!(matches!(sample_naive(&s, bx, SeedSpec::default(), 1000), Err(Error::PairCapExceeded { .. })));
    }

    #[test]
    fn naive_edge_frequency_matches_probability() {
        let s = spec(1, 0.5, 1.0);
        let bx = LatticeBox::new(1, 1).unwrap();
        let sampler = NaiveSampler::new(&s, bx, DEFAULT_PAIR_CAP).unwrap();
        let target = Edge::new(1, 2); // {0, 1}
        let reps = 100_000u64;
        let mut edges = Vec::new();
        let hits = (0..reps)
            .filter(|&r| {
                sampler.sample_edges_into(SeedSpec::new(9, r), &mut edges);
                edges.contains(&target)
            })
            .count() as f64;
        let p = 1.0 - (-1.0f64).exp();
        let sigma = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits / reps as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn grouped_matches_naive_marginals_on_small_box() {
        let s = spec(1, 0.5, 1.0);
        let bx = LatticeBox::new(1, 2).unwrap();
        let reps = 100_000u64;
        let grouped = GroupedSampler::new(&s, bx).unwrap();
        let naive = NaiveSampler::new(&s, bx, DEFAULT_PAIR_CAP).unwrap();
        let mut fg = [0u64; 25];
        let mut fn_ = [0u64; 25];
        let mut edges = Vec::new();
        let mut scratch = SamplerScratch::default();
        for r in 0..reps {
            grouped.sample_edges_into(SeedSpec::new(1, r), &mut edges, &mut scratch);
            for e in &edges {
                fg[e.a as usize * 5 + e.b as usize] += 1;
            }
            naive.sample_edges_into(SeedSpec::new(2, r), &mut edges);
            for e in &edges {
                fn_[e.a as usize * 5 + e.b as usize] += 1;
            }
        }
        for a in 0..5usize {
            for b in a + 1..5 {
                let p = s.connection_probability(&bx.coords(a), &bx.coords(b));
                let sigma = (2.0 * p * (1.0 - p) / reps as f64).sqrt();
                let diff = (fg[a * 5 + b] as f64 - fn_[a * 5 + b] as f64) / reps as f64;
                assert!(diff.abs() < 4.0 * sigma, "edge {a}-{b}: {diff} vs sigma {sigma}");
            }
        }
    }

    #[test]
    fn mean_edge_count_matches_exact_sum() {
        let s = spec(1, 0.5, 0.5);
        let bx = LatticeBox::new(1, 8).unwrap();
        let sampler = GroupedSampler::new(&s, bx).unwrap();
        let reps = 10_000u64;
        let mut edges = Vec::new();
        let mut scratch = SamplerScratch::default();
        let (mut sum, mut sum2) = (0.0, 0.0);
        for r in 0..reps {
            sampler.sample_edges_into(SeedSpec::new(4, r), &mut edges, &mut scratch);
            let c = edges.len() as f64;
            sum += c;
            sum2 += c * c;
        }
        let mean = sum / reps as f64;
        let var = sum2 / reps as f64 - mean * mean;
        let exact = expected_edge_count(&s, bx).unwrap();
        assert!((mean - exact).abs() < 3.0 * (var / reps as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn distinct_edges_are_uncorrelated() {
        // {0,1} and {0,2} share a vertex but are independent; so are two edges in one class
        let s = spec(1, 0.5, 1.0);
        let bx = LatticeBox::new(1, 2).unwrap();
        let sampler = GroupedSampler::new(&s, bx).unwrap();
        let pairs = [(Edge::new(2, 3), Edge::new(2, 4)), (Edge::new(0, 1), Edge::new(1, 2))];
        let reps = 100_000u64;
        let mut edges = Vec::new();
        let mut scratch = SamplerScratch::default();
        let mut counts = [[0u64; 3]; 2];
        for r in 0..reps {
            sampler.sample_edges_into(SeedSpec::new(6, r), &mut edges, &mut scratch);
            for (k, (e, f)) in pairs.iter().enumerate() {
                let (x, y) = (edges.contains(e), edges.contains(f));
                counts[k][0] += x as u64;
                counts[k][1] += y as u64;
                counts[k][2] += (x && y) as u64;
            }
        }
        for c in counts {
            let (px, py, pxy) = (c[0] as f64 / reps as f64, c[1] as f64 / reps as f64, c[2] as f64 / reps as f64);
            let cov = pxy - px * py;
            let sigma = (px * (1.0 - px) * py * (1.0 - py) / reps as f64).sqrt();
            assert!(cov.abs() < 3.0 * sigma, "cov {cov}, sigma {sigma}");
        }
    }
}
