//! The long-range kernel `J(x, y) = C1 * |x - y|^(-d - alpha)`, connection
//! probabilities and exact sums of edge probabilities leaving a box.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{power_times_edge_tail, Bounded, CompensatedSum};
use crate::{Error, Result};

/// Largest supported dimension. Boxes grow as `(2n+1)^d`, so this is not a
/// practical restriction.
pub const MAX_DIM: usize = 8;

/// Norm used in `|x - y|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    Sup,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub norm: Norm,
}

impl KernelSpec {
    /// Sup-norm kernel with unit amplitude.
    pub fn new(d: usize, alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self { d, alpha, beta, amplitude: 1.0, norm: Norm::Sup };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn with_norm(self, norm: Norm) -> Self {
        Self { norm, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::InvalidSpec(format!("dimension {} outside 1..={MAX_DIM}", self.d)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidSpec(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec(format!("beta must be non-negative and finite, got {}", self.beta)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidSpec(format!("amplitude must be positive and finite, got {}", self.amplitude)));
        }
        Ok(())
    }

    /// Criticality experiments need `beta_c < infinity`, which fails for `d = 1, alpha >= 1`.
    pub fn require_finite_critical_point(&self) -> Result<()> {
        self.validate()?;
        if self.d == 1 && self.alpha >= 1.0 {
            return Err(Error::InfiniteCriticalPoint { alpha: self.alpha });
        }
        Ok(())
    }

    #[inline]
    pub fn decay_exponent(&self) -> f64 {
        self.d as f64 + self.alpha
    }

    /// `|v|` under the configured norm.
    pub fn norm_of(&self, v: &[i64]) -> f64 {
        match self.norm {
            Norm::Sup => v.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) as f64,
            Norm::Euclidean => libm::sqrt(v.iter().map(|&c| (c * c) as f64).sum::<f64>()),
        }
    }

    /// `J` as a function of the distance `r > 0`.
    #[inline]
    pub fn kernel_at_distance(&self, r: f64) -> f64 {
        self.amplitude * libm::pow(r, -self.decay_exponent())
    }

    /// `1 - exp(-beta J)` as a function of the distance `r > 0`.
    #[inline]
    pub fn probability_at_distance(&self, r: f64) -> f64 {
        -libm::expm1(-self.beta * self.kernel_at_distance(r))
    }

    pub fn displacement_kernel(&self, v: &[i64]) -> f64 {
        let r = self.norm_of(v);
        if r == 0.0 {
            0.0
        } else {
            self.kernel_at_distance(r)
        }
    }

    pub fn displacement_probability(&self, v: &[i64]) -> f64 {
        let r = self.norm_of(v);
        if r == 0.0 || self.beta == 0.0 {
            0.0
        } else {
            self.probability_at_distance(r)
        }
    }

    /// `J(x, y)`; zero on the diagonal.
    pub fn kernel_value(&self, x: &[i64], y: &[i64]) -> f64 {
        let v = difference(x, y);
        self.displacement_kernel(&v[..x.len()])
    }

    /// Probability that the edge `{x, y}` is open.
    pub fn connection_probability(&self, x: &[i64], y: &[i64]) -> f64 {
        let v = difference(x, y);
        self.displacement_probability(&v[..x.len()])
    }
}

fn difference(x: &[i64], y: &[i64]) -> [i64; MAX_DIM] {
    debug_assert_eq!(x.len(), y.len());
    let mut v = [0i64; MAX_DIM];
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        v[i] = b - a;
    }
    v
}

/// The box `{-n, ..., n}^d`, with vertices linearised row-major (first
/// coordinate most significant, each coordinate shifted by `n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeBox {
    pub d: usize,
    pub n: u32,
}

impl LatticeBox {
    pub fn new(d: usize, n: u32) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidSpec(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        let side = 2 * n as u64 + 1;
        let mut len: u64 = 1;
        for _ in 0..d {
            len = len.checked_mul(side).filter(|&l| l <= u32::MAX as u64).ok_or_else(|| Error::InvalidSpec(format!("box of radius {n} in d = {d} is too large")))?;
        }
        Ok(Self { d, n })
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.n as usize + 1
    }

    /// Number of vertices, `(2n+1)^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let n = self.n as i64;
        x.len() == self.d && x.iter().all(|&c| -n <= c && c <= n)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let side = self.side();
        let n = self.n as i64;
        Some(x.iter().fold(0usize, |acc, &c| acc * side + (c + n) as usize))
    }

    /// Writes the coordinates of vertex `index` into `out[..d]`.
    #[inline]
    pub fn coords_into(&self, mut index: usize, out: &mut [i64]) {
        let side = self.side();
        let n = self.n as i64;
        for slot in out[..self.d].iter_mut().rev() {
            *slot = (index % side) as i64 - n;
            index /= side;
        }
    }

    pub fn coords(&self, index: usize) -> Vec<i64> {
        let mut out = vec![0; self.d];
        self.coords_into(index, &mut out);
        out
    }

    #[inline]
    pub fn origin_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    pub fn sup_norm_of_index(&self, mut index: usize) -> u32 {
        let side = self.side();
        let mut r = 0;
        for _ in 0..self.d {
            let c = (index % side) as i64 - self.n as i64;
            r = r.max(c.unsigned_abs() as u32);
            index /= side;
        }
        r
    }

    /// Sup norm of every vertex, indexed like the box.
    pub fn sup_norms(&self) -> Vec<u32> {
        (0..self.len()).map(|i| self.sup_norm_of_index(i)).collect()
    }
}

/// Options for [`ExteriorSums`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExteriorOptions {
    /// Largest certified truncation error allowed, relative to the total edge
    /// weight at a vertex.
    pub tolerance: f64,
    /// Largest shell radius summed explicitly for the Euclidean norm.
    pub euclidean_max_radius: u32,
}

impl Default for ExteriorOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, euclidean_max_radius: 4096 }
    }
}

/// Precomputed exact sums `sum_{b not in Lambda_k} (1 - exp(-beta J(a, b)))` for
/// all `a in Lambda_k`, `k <= max_radius`.
///
/// Under the sup norm the sum splits into shells `|b - a| = l`: the explicit
/// part covers shells that cut `Lambda_k`, the rest is the whole-shell tail
/// `Q(L) = sum_{l > L} |shell(l)| p(l)`, computed once by an alternating Hurwitz
/// zeta expansion with a certified remainder and extended downwards exactly.
#[derive(Debug, Clone)]
pub struct ExteriorSums {
    spec: KernelSpec,
    max_radius: u32,
    inner: Inner,
    error: f64,
    total: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Zero,
    Sup {
        /// p(l) for l = 0..=2K (p(0) = 0)
        prob: Vec<f64>,
        /// |{b : |b|_inf = l}| as f64
        shell: Vec<f64>,
        /// Q(L) for L = 0..=2K
        tail: Vec<f64>,
    },
    Euclidean {
        total: f64,
        /// p over the displacement cube [-2K, 2K]^d
        table: Vec<f64>,
    },
}

fn shell_count(d: usize, l: u64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    libm::pow((2 * l + 1) as f64, d as f64) - libm::pow((2 * l - 1) as f64, d as f64)
}

/// Coefficients `s_j` with `|{b : |b|_inf = l}| = sum_j s_j l^j` for `l >= 1`.
fn shell_polynomial(d: usize) -> Vec<f64> {
    // (2l+1)^d - (2l-1)^d = 2 * sum_{i : d - i odd} C(d, i) 2^i l^i
    let mut coefs = vec![0.0; d];
    let mut binom = 1.0;
    for (i, c) in coefs.iter_mut().enumerate() {
        if i > 0 {
            binom = binom * (d - i + 1) as f64 / i as f64;
        }
        if (d - i) % 2 == 1 {
            *c = 2.0 * binom * libm::pow(2.0, i as f64);
        }
    }
    coefs
}

/// `sum_{l > start_after} |shell(l)| * p(l)` with its certified error.
fn whole_shell_tail(spec: &KernelSpec, start_after: u64) -> Bounded {
    let c = spec.beta * spec.amplitude;
    let s = spec.decay_exponent();
    // explicit shells until c l^{-s} <= 1/2 so the alternating expansion converges quickly
    let threshold = libm::ceil(libm::pow(2.0 * c, 1.0 / s)) as u64;
    let switch = start_after.max(threshold).max(32);
    let mut acc = CompensatedSum::new();
    for l in start_after + 1..=switch {
        acc.add(shell_count(spec.d, l) * spec.probability_at_distance(l as f64));
    }
    let mut error = 0.0;
    for (power, coef) in shell_polynomial(spec.d).into_iter().enumerate() {
        if coef == 0.0 {
            continue;
        }
        let t = power_times_edge_tail(c, s, power as u32, (switch + 1) as f64);
        acc.add(coef * t.value);
        error += coef * t.error;
    }
    let value = acc.value();
    Bounded { value, error: error + 4.0 * f64::EPSILON * value }
}

/// Bounds on `sum_{|b|_inf > r} p(|b|_2)` for the Euclidean norm, using
/// `l <= |b|_2 <= sqrt(d) l` and `x - x^2/2 <= 1 - e^{-x} <= x`.
fn euclidean_remainder(spec: &KernelSpec, r: u64) -> (f64, f64) {
    let c = spec.beta * spec.amplitude;
    let s = spec.decay_exponent();
    let dim_factor = libm::pow(spec.d as f64, -s / 2.0);
    let mut upper = 0.0;
    let mut lower = 0.0;
    for (power, coef) in shell_polynomial(spec.d).into_iter().enumerate() {
        if coef == 0.0 {
            continue;
        }
        let z1 = crate::math::hurwitz_zeta(s - power as f64, (r + 1) as f64);
        let z2 = crate::math::hurwitz_zeta(2.0 * s - power as f64, (r + 1) as f64);
        upper += coef * c * (z1.value + z1.error);
        lower += coef * (c * dim_factor * (z1.value - z1.error) - 0.5 * c * c * (z2.value + z2.error));
    }
    (lower.max(0.0), upper)
}

impl ExteriorSums {
    pub fn new(spec: &KernelSpec, max_radius: u32) -> Result<Self> {
        Self::with_options(spec, max_radius, ExteriorOptions::default())
    }

    pub fn with_options(spec: &KernelSpec, max_radius: u32, options: ExteriorOptions) -> Result<Self> {
        spec.validate()?;
        if spec.beta == 0.0 {
            return Ok(Self { spec: *spec, max_radius, inner: Inner::Zero, error: 0.0, total: 0.0 });
        }
        let norm = if spec.d == 1 { Norm::Sup } else { spec.norm };
        let lmax = 2 * max_radius as usize;
        match norm {
            Norm::Sup => {
                let prob: Vec<f64> = (0..=lmax).map(|l| if l == 0 { 0.0 } else { spec.probability_at_distance(l as f64) }).collect();
                let shell: Vec<f64> = (0..=lmax).map(|l| shell_count(spec.d, l as u64)).collect();
                let far = whole_shell_tail(spec, lmax as u64);
                let mut tail = vec![0.0; lmax + 1];
                let mut acc = CompensatedSum::new();
                acc.add(far.value);
                tail[lmax] = acc.value();
                for l in (1..=lmax).rev() {
                    acc.add(shell[l] * prob[l]);
                    tail[l - 1] = acc.value();
                }
                let total = tail[0];
                let error = far.error + 4.0 * f64::EPSILON * total;
                if error > options.tolerance * total {
                    return Err(Error::TruncationTolerance { bound: error, tolerance: options.tolerance * total });
                }
                Ok(Self { spec: *spec, max_radius, inner: Inner::Sup { prob, shell, tail }, error, total })
            }
            Norm::Euclidean => {
                let d = spec.d;
                let mut radius = (lmax as u64).max(32);
                loop {
                    let (lo, hi) = euclidean_remainder(spec, radius);
                    let half_width = 0.5 * (hi - lo);
                    let cube = LatticeBox::new(d, radius as u32)?;
                    let mut acc = CompensatedSum::new();
                    let mut x = [0i64; MAX_DIM];
                    for i in 0..cube.len() {
                        cube.coords_into(i, &mut x);
                        acc.add(spec.displacement_probability(&x[..d]));
                    }
                    acc.add(0.5 * (lo + hi));
                    let total = acc.value();
                    let error = half_width + 4.0 * f64::EPSILON * total * libm::sqrt(cube.len() as f64);
                    if error <= options.tolerance * total {
                        let table_box = LatticeBox::new(d, lmax as u32)?;
                        let mut table = vec![0.0; table_box.len()];
                        for (i, slot) in table.iter_mut().enumerate() {
                            table_box.coords_into(i, &mut x);
                            *slot = spec.displacement_probability(&x[..d]);
                        }
                        return Ok(Self { spec: *spec, max_radius, inner: Inner::Euclidean { total, table }, error, total });
                    }
                    if radius >= options.euclidean_max_radius as u64 {
                        return Err(Error::TruncationTolerance { bound: error, tolerance: options.tolerance * total });
                    }
                    radius = (2 * radius).min(options.euclidean_max_radius as u64);
                }
            }
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn max_radius(&self) -> u32 {
        self.max_radius
    }

    /// `sum_{b != a} p(a, b)`, the full edge weight at a vertex.
    pub fn total_weight(&self) -> Bounded {
        Bounded { value: self.total, error: self.error }
    }

    /// `sum_{b not in Lambda_k} p(a, b)` for `a in Lambda_k`.
    pub fn exterior_weight(&self, a: &[i64], k: u32) -> Result<Bounded> {
        if k > self.max_radius {
            return Err(Error::RadiusOutOfRange { k, n: self.max_radius });
        }
        let bx = LatticeBox::new(self.spec.d, k)?;
        if !bx.contains(a) {
            return Err(Error::Precondition(format!("point {a:?} is not in the box of radius {k}")));
        }
        Ok(Bounded { value: self.exterior_weight_unchecked(a, k), error: self.error })
    }

    /// As [`Self::exterior_weight`] without validation; `a` must lie in `Lambda_k`.
    pub fn exterior_weight_unchecked(&self, a: &[i64], k: u32) -> f64 {
        match &self.inner {
            Inner::Zero => 0.0,
            Inner::Sup { prob, shell, tail } => {
                let k = k as i64;
                let r = a.iter().map(|c| c.abs()).max().unwrap_or(0);
                let last = (k + r) as usize;
                let mut acc = CompensatedSum::new();
                let mut prev_inside = inside_count(a, k, k - r);
                for l in (k - r + 1)..=(k + r) {
                    let inside = inside_count(a, k, l);
                    let outside = shell[l as usize] - (inside - prev_inside) as f64;
                    if outside > 0.0 {
                        acc.add(outside * prob[l as usize]);
                    }
                    prev_inside = inside;
                }
                acc.add(tail[last]);
                acc.value()
            }
            Inner::Euclidean { total, table } => {
                let d = self.spec.d;
                let k = k as i64;
                let table_box = LatticeBox { d, n: 2 * self.max_radius };
                let inner_box = LatticeBox { d, n: k as u32 };
                let mut b = [0i64; MAX_DIM];
                let mut v = [0i64; MAX_DIM];
                let mut acc = CompensatedSum::new();
                acc.add(*total);
                for i in 0..inner_box.len() {
                    inner_box.coords_into(i, &mut b);
                    for j in 0..d {
                        v[j] = b[j] - a[j];
                    }
                    let idx = table_box.index_of(&v[..d]).expect("displacement inside table");
                    acc.add(-table[idx]);
                }
                acc.value().max(0.0)
            }
        }
    }

    /// Certified absolute error shared by every exterior weight.
    pub fn error_bound(&self) -> f64 {
        self.error
    }
}

/// `|{b in Lambda_k : |b - a|_inf <= l}|`
fn inside_count(a: &[i64], k: i64, l: i64) -> i64 {
    if l < 0 {
        return 0;
    }
    a.iter().map(|&c| ((c + l).min(k) - (c - l).max(-k) + 1).max(0)).product()
}

/// `E|boundary(Lambda_n)|`: expected number of open edges with exactly one
/// endpoint in `Lambda_n`, computed exactly.
pub fn expected_boundary_edges(spec: &KernelSpec, bx: LatticeBox) -> Result<Bounded> {
    expected_boundary_edges_with(spec, bx, ExteriorOptions::default())
}

pub fn expected_boundary_edges_with(spec: &KernelSpec, bx: LatticeBox, options: ExteriorOptions) -> Result<Bounded> {
    if bx.d != spec.d {
        return Err(Error::InvalidSpec(format!("box dimension {} differs from model dimension {}", bx.d, spec.d)));
    }
    let sums = ExteriorSums::with_options(spec, bx.n, options)?;
    let mut acc = CompensatedSum::new();
    let mut x = [0i64; MAX_DIM];
    for i in 0..bx.len() {
        bx.coords_into(i, &mut x);
        acc.add(sums.exterior_weight_unchecked(&x[..bx.d], bx.n));
    }
    Ok(Bounded { value: acc.value(), error: sums.error_bound() * bx.len() as f64 })
}
