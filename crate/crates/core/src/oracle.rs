//! Exact enumeration over all edge subsets of tiny boxes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::clusters::typical_value_exact;
use crate::exec::{chunks, Executor};
use crate::kernel::{ExteriorSums, KernelSpec, LatticeBox};
use crate::math::{Bounded, CompensatedSum};
use crate::{Error, Result};

/// At most `2^24` configurations.
pub const MAX_ORACLE_EDGES: usize = 24;
/// Exact rational enumeration is far slower; keep it to `2^16` configurations.
pub const MAX_RATIONAL_EDGES: usize = 16;

const MAX_ORACLE_VERTICES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub lattice: LatticeBox,
    pub spec: KernelSpec,
    /// Candidate edges `(a, b)` by vertex index.
    pub edges: Vec<(u32, u32)>,
    /// Sum of all configuration weights (1 up to rounding).
    pub total_probability: f64,
    /// `t_x = P(0 <-> x within the box)` by vertex index.
    pub two_point: Vec<f64>,
    /// `E|K_0|`
    pub origin_mean: f64,
    /// `P(|K_0| = s)` by `s`.
    pub origin_distribution: Vec<f64>,
    /// `P(|K_max| = s)` by `s`.
    pub largest_distribution: Vec<f64>,
    /// `M_beta` of the box.
    pub typical_value: u64,
    /// `phi_beta(Lambda_n)` with exact `t_x`.
    pub phi: Bounded,
}

impl ExactDistribution {
    /// `P(|K_0| >= m)`
    pub fn origin_tail(&self, m: u64) -> f64 {
        self.origin_distribution.iter().skip(m as usize).sum()
    }

    /// `P(|K_max| >= m)`
    pub fn largest_tail(&self, m: u64) -> f64 {
        self.largest_distribution.iter().skip(m as usize).sum()
    }
}

/// Candidate edges (pairs with positive probability) of a box, with their probabilities.
pub fn candidate_edges(spec: &KernelSpec, lattice: LatticeBox) -> (Vec<(u32, u32)>, Vec<f64>) {
    let len = lattice.len();
    let mut edges = Vec::new();
    let mut probs = Vec::new();
    let (mut x, mut y) = (vec![0i64; lattice.d], vec![0i64; lattice.d]);
    for a in 0..len {
        lattice.coords_into(a, &mut x);
        for b in a + 1..len {
            lattice.coords_into(b, &mut y);
            let p = spec.connection_probability(&x, &y);
            if p > 0.0 {
                edges.push((a as u32, b as u32));
                probs.push(p);
            }
        }
    }
    (edges, probs)
}

#[derive(Clone)]
struct Accum {
    total: CompensatedSum,
    two_point: Vec<CompensatedSum>,
    origin: Vec<CompensatedSum>,
    largest: Vec<CompensatedSum>,
}

impl Accum {
    fn new(len: usize) -> Self {
        Self {
            total: CompensatedSum::new(),
            two_point: vec![CompensatedSum::new(); len],
            origin: vec![CompensatedSum::new(); len + 1],
            largest: vec![CompensatedSum::new(); len + 1],
        }
    }

    fn merge(&mut self, o: &Accum) {
        self.total.merge(&o.total);
        for (a, b) in self.two_point.iter_mut().zip(&o.two_point) {
            a.merge(b);
        }
        for (a, b) in self.origin.iter_mut().zip(&o.origin) {
            a.merge(b);
        }
        for (a, b) in self.largest.iter_mut().zip(&o.largest) {
            a.merge(b);
        }
    }
}

/// Components of the subset `mask` of `edges`: fills `root` and `size`.
#[inline]
fn components(len: usize, edges: &[(u32, u32)], mask: u64, root: &mut [u8; MAX_ORACLE_VERTICES], size: &mut [u8; MAX_ORACLE_VERTICES]) {
    for v in 0..len {
        root[v] = v as u8;
        size[v] = 1;
    }
    let find = |root: &mut [u8; MAX_ORACLE_VERTICES], mut v: u8| {
        while root[v as usize] != v {
            root[v as usize] = root[root[v as usize] as usize];
            v = root[v as usize];
        }
        v
    };
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        m &= m - 1;
        let (a, b) = (find(root, edges[i].0 as u8), find(root, edges[i].1 as u8));
        if a != b {
            let (big, small) = if size[a as usize] >= size[b as usize] { (a, b) } else { (b, a) };
            root[small as usize] = big;
            size[big as usize] += size[small as usize];
        }
    }
    for v in 0..len {
        root[v] = find(root, v as u8);
    }
}

/// Product weights of all subsets of `probs`, split into a low and a high half table.
fn half_tables(probs: &[f64]) -> (usize, Vec<f64>, Vec<f64>) {
    let lo_bits = probs.len() / 2;
    let table = |ps: &[f64]| {
        let mut t = vec![1.0; 1 << ps.len()];
        for (mask, w) in t.iter_mut().enumerate() {
            for (i, p) in ps.iter().enumerate() {
                *w *= if mask >> i & 1 == 1 { *p } else { 1.0 - *p };
            }
        }
        t
    };
    (lo_bits, table(&probs[..lo_bits]), table(&probs[lo_bits..]))
}

/// Exact distribution by summing over all `2^|E|` subsets of candidate edges.
pub fn enumerate<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, lattice: LatticeBox) -> Result<ExactDistribution> {
    let (edges, probs) = candidate_edges(spec, lattice);
    enumerate_edges(exec, spec, lattice, edges, &probs)
}

/// [`enumerate`] with explicit edge probabilities.
pub fn enumerate_edges<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, lattice: LatticeBox, edges: Vec<(u32, u32)>, probs: &[f64]) -> Result<ExactDistribution> {
    if edges.len() > MAX_ORACLE_EDGES {
        return Err(Error::EdgeCapExceeded { edges: edges.len(), cap: MAX_ORACLE_EDGES });
    }
    let len = lattice.len();
    if len > MAX_ORACLE_VERTICES {
        return Err(Error::Precondition(format!("oracle boxes hold at most {MAX_ORACLE_VERTICES} vertices")));
    }
    let origin = lattice.origin_index();
    let (lo_bits, lo, hi) = half_tables(probs);
    let lo_mask = (1u64 << lo_bits) - 1;
    let configs = 1u64 << edges.len();
    let ranges: Vec<Range<u64>> = chunks(0..configs, 1 << 14);
    let parts = exec.map(&ranges, |range| {
        let mut acc = Accum::new(len);
        let (mut root, mut size) = ([0u8; MAX_ORACLE_VERTICES], [0u8; MAX_ORACLE_VERTICES]);
        for mask in range {
            let w = lo[(mask & lo_mask) as usize] * hi[(mask >> lo_bits) as usize];
            components(len, &edges, mask, &mut root, &mut size);
            acc.total.add(w);
            let r0 = root[origin];
            let mut largest = 0;
            for v in 0..len {
                if root[v] == r0 {
                    acc.two_point[v].add(w);
                }
                if root[v] as usize == v {
                    largest = largest.max(size[v]);
                }
            }
            acc.origin[size[r0 as usize] as usize].add(w);
            acc.largest[largest as usize].add(w);
        }
        acc
    });
    let mut acc = Accum::new(len);
    for p in &parts {
        acc.merge(p);
    }
    let two_point: Vec<f64> = acc.two_point.iter().map(|s| s.value()).collect();
    let origin_distribution: Vec<f64> = acc.origin.iter().map(|s| s.value()).collect();
    let largest_distribution: Vec<f64> = acc.largest.iter().map(|s| s.value()).collect();
    let origin_mean = crate::math::compensated_sum(two_point.iter().copied());
    let phi = exact_phi_from(spec, lattice, &two_point)?;
    Ok(ExactDistribution {
        lattice,
        spec: *spec,
        edges,
        total_probability: acc.total.value(),
        typical_value: typical_value_exact(&largest_distribution),
        two_point,
        origin_mean,
        origin_distribution,
        largest_distribution,
        phi,
    })
}

fn exact_phi_from(spec: &KernelSpec, lattice: LatticeBox, two_point: &[f64]) -> Result<Bounded> {
    let sums = ExteriorSums::new(spec, lattice.n)?;
    let mut x = vec![0i64; lattice.d];
    let (mut value, mut error) = (CompensatedSum::new(), 0.0);
    for (v, &t) in two_point.iter().enumerate() {
        lattice.coords_into(v, &mut x);
        let w = sums.exterior_weight(&x, lattice.n)?;
        value.add(w.value * t);
        error += w.error * t;
    }
    Ok(Bounded { value: value.value(), error })
}

/// `phi_beta(Lambda_n) = sum_x ext(x, n) t_x` with exact `t_x`.
pub fn exact_phi<E: Executor + ?Sized>(exec: &E, spec: &KernelSpec, lattice: LatticeBox) -> Result<Bounded> {
    if lattice.n == 0 {
        return ExteriorSums::new(spec, 0)?.exterior_weight(&vec![0; spec.d], 0);
    }
    Ok(enumerate(exec, spec, lattice)?.phi)
}

/// Exact rational results for rational edge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalDistribution {
    pub total_probability: BigRational,
    pub two_point: Vec<BigRational>,
    pub origin_mean: BigRational,
    pub largest_distribution: Vec<BigRational>,
}

/// Exact-arithmetic enumeration; `probs[i]` belongs to `edges[i]`.
pub fn enumerate_rational(lattice: LatticeBox, edges: &[(u32, u32)], probs: &[BigRational]) -> Result<RationalDistribution> {
    if edges.len() > MAX_RATIONAL_EDGES {
        return Err(Error::EdgeCapExceeded { edges: edges.len(), cap: MAX_RATIONAL_EDGES });
    }
    let len = lattice.len();
    if len > MAX_ORACLE_VERTICES {
        return Err(Error::Precondition(format!("oracle boxes hold at most {MAX_ORACLE_VERTICES} vertices")));
    }
    let zero = || BigRational::from_integer(BigInt::zero());
    let origin = lattice.origin_index();
    let mut total = zero();
    let mut two_point = vec![zero(); len];
    let mut largest = vec![zero(); len + 1];
    let (mut root, mut size) = ([0u8; MAX_ORACLE_VERTICES], [0u8; MAX_ORACLE_VERTICES]);
    for mask in 0..1u64 << edges.len() {
        let mut w = BigRational::one();
        for (i, p) in probs.iter().enumerate() {
            w *= if mask >> i & 1 == 1 { p.clone() } else { BigRational::one() - p };
        }
        components(len, edges, mask, &mut root, &mut size);
        total += &w;
        let mut big = 0;
        for v in 0..len {
            if root[v] == root[origin] {
                two_point[v] += &w;
            }
            if root[v] as usize == v {
                big = big.max(size[v]);
            }
        }
        largest[big as usize] += &w;
    }
    let origin_mean = two_point.iter().fold(zero(), |a, b| a + b);
    Ok(RationalDistribution { total_probability: total, two_point, origin_mean, largest_distribution: largest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn spec(alpha: f64, beta: f64) -> KernelSpec {
        KernelSpec::new(1, alpha, beta).unwrap()
    }

    #[test]
    fn zero_beta_has_no_edges() {
        let bx = LatticeBox::new(1, 2).unwrap();
        let ex = enumerate(&Sequential, &spec(0.5, 0.0), bx).unwrap();
        assert!(ex.edges.is_empty());
        assert_eq!(ex.origin_mean, 1.0);
        assert_eq!(ex.typical_value, 2);
        assert!(ex.two_point.iter().enumerate().all(|(v, &t)| if v == bx.origin_index() { t == 1.0 } else { t == 0.0 }));
        assert_eq!(ex.phi, Bounded::ZERO);
    }

    #[test]
    fn lambda_one_closed_form() {
        let s = spec(0.5, 1.0);
        let bx = LatticeBox::new(1, 1).unwrap();
        let ex = enumerate(&Sequential, &s, bx).unwrap();
        let p1 = -(-1.0f64).exp_m1();
        let p2 = -(-(2.0f64).powf(-1.5)).exp_m1();
        let t1 = p1 + (1.0 - p1) * p1 * p2;
        assert!((ex.total_probability - 1.0).abs() < 1e-15);
        assert!((ex.two_point[2] - t1).abs() < 1e-15);
        assert!((ex.two_point[0] - t1).abs() < 1e-15);
        assert!((t1 - 0.701_375).abs() < 5e-7);
        assert!((ex.origin_mean - (1.0 + 2.0 * t1)).abs() < 1e-15);
        assert!((ex.origin_tail(2) - (1.0 - (1.0 - p1) * (1.0 - p1))).abs() < 1e-15);
        let phi = exact_phi(&Sequential, &s, bx).unwrap();
        assert_eq!(phi, ex.phi);
    }

    #[test]
    fn lambda_zero_phi_is_the_exterior_weight() {
        let s = spec(0.5, 1.0);
        let phi = exact_phi(&Sequential, &s, LatticeBox::new(1, 0).unwrap()).unwrap();
        assert!((phi.value - 4.303_817_293_247_182).abs() < 1e-12);
    }

    #[test]
    fn edge_cap() {
        let bx = LatticeBox::new(1, 4).unwrap();
        assert!(matches!(enumerate(&Sequential, &spec(0.5, 1.0), bx), Err(Error::EdgeCapExceeded { .. })));
    }

    #[test]
    fn distributions_are_normalised_and_consistent() {
        let bx = LatticeBox::new(1, 2).unwrap();
        let ex = enumerate(&Sequential, &spec(0.3, 2.0), bx).unwrap();
        assert!((ex.total_probability - 1.0).abs() < 1e-14);
        assert!((ex.largest_distribution.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // sum_x t_x = E|K_0| from the size distribution
        let from_sizes: f64 = ex.origin_distribution.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
        assert!((ex.origin_mean - from_sizes).abs() < 1e-14);
        assert!(ex.two_point.iter().all(|&t| (0.0..=1.0 + 1e-15).contains(&t)));
        // M is the smallest m with P(|K_max| >= m) <= 1/e
        let m = ex.typical_value;
        assert!(ex.largest_tail(m) <= crate::clusters::INV_E && ex.largest_tail(m - 1) > crate::clusters::INV_E);
    }

    #[test]
    fn monotone_in_beta() {
        let bx = LatticeBox::new(1, 2).unwrap();
        let mut prev: Option<ExactDistribution> = None;
        for beta in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
            let ex = enumerate(&Sequential, &spec(0.8, beta), bx).unwrap();
            if let Some(p) = &prev {
                assert!(ex.two_point.iter().zip(&p.two_point).all(|(a, b)| *a >= b - 1e-15));
                assert!(ex.origin_mean >= p.origin_mean - 1e-15);
                assert!(ex.phi.value >= p.phi.value - 1e-12);
            }
            prev = Some(ex);
        }
    }

    #[test]
    fn rational_mode_agrees_with_floats() {
        let bx = LatticeBox::new(1, 1).unwrap();
        let edges = vec![(0, 1), (0, 2), (1, 2)];
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let exact = enumerate_rational(bx, &edges, &[half.clone(), half.clone(), half]).unwrap();
        assert_eq!(exact.total_probability, BigRational::one());
        // t_1 = 1/2 + 1/2 * 1/2 * 1/2
        assert_eq!(exact.two_point[2], BigRational::new(BigInt::from(5), BigInt::from(8)));
        assert_eq!(exact.origin_mean, BigRational::new(BigInt::from(9), BigInt::from(4)));
        let float = enumerate_edges(&Sequential, &spec(0.5, 1.0), bx, edges, &[0.5; 3]).unwrap();
        assert_eq!(float.two_point[2], 0.625);
        assert_eq!(float.origin_mean, 2.25);
    }

    #[test]
    fn half_tables_multiply_to_subset_weights() {
        let probs = [0.1, 0.7, 0.3, 0.9, 0.5];
        let (lo_bits, lo, hi) = half_tables(&probs);
        for mask in 0..32u64 {
            let direct: f64 = probs.iter().enumerate().map(|(i, p)| if mask >> i & 1 == 1 { *p } else { 1.0 - p }).product();
            let split = lo[(mask & ((1 << lo_bits) - 1)) as usize] * hi[(mask >> lo_bits) as usize];
            assert!((direct - split).abs() < 1e-16);
        }
    }
}
