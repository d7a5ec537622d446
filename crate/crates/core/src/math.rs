//! Compensated summation and the Hurwitz-zeta machinery behind exact tail sums.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, compensation: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = CompensatedSum::new();
    s.extend(iter);
    s.value()
}

/// A value together with a certified bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub error: f64,
}

impl Bounded {
    pub const ZERO: Bounded = Bounded { value: 0.0, error: 0.0 };
}

// B_2, B_4, ..., B_24
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Hurwitz zeta `sum_{j >= 0} (a + j)^(-s)` for `s > 1`, `a >= 1`.
///
/// Direct summation up to a shift where Euler-Maclaurin converges fast, then
/// the Euler-Maclaurin expansion. The integrand is completely monotone, so the
/// remainder is bounded by the first omitted correction term; that bound plus
/// a rounding allowance is returned as the error.
pub fn hurwitz_zeta(s: f64, a: f64) -> Bounded {
    debug_assert!(s > 1.0 && a >= 1.0);
    let shift_target = if s + 24.0 > 32.0 { s + 24.0 } else { 32.0 };
    let mut head = CompensatedSum::new();
    let mut b = a;
    while b < shift_target {
        head.add(libm::pow(b, -s));
        b += 1.0;
    }
    let b_pow = libm::pow(b, -s);
    let mut tail = CompensatedSum::new();
    tail.add(b * b_pow / (s - 1.0));
    tail.add(0.5 * b_pow);
    // rising factorial (s)_{2k-1} / (2k)!, times b^{-s-2k+1}
    let inv_b2 = 1.0 / (b * b);
    let mut factor = s / 2.0 * b_pow / b; // k = 1: s / 2! * b^{-s-1}
    let mut error = 0.0;
    for (k, bern) in BERNOULLI_EVEN.iter().enumerate() {
        let term = bern * factor;
        if k + 1 == BERNOULLI_EVEN.len() {
            error = libm::fabs(term);
            break;
        }
        if libm::fabs(term) <= 1e-18 * tail.value() {
            error = libm::fabs(term);
            break;
        }
        tail.add(term);
        let k1 = (k + 1) as f64; // current k, 1-based
                                 // (s)_{2k+1}/(2k+2)! = (s)_{2k-1}/(2k)! * (s+2k-1)(s+2k) / ((2k+1)(2k+2))
        factor *= (s + 2.0 * k1 - 1.0) * (s + 2.0 * k1) / ((2.0 * k1 + 1.0) * (2.0 * k1 + 2.0)) * inv_b2;
    }
    let value = head.value() + tail.value();
    Bounded { value, error: error + 8.0 * f64::EPSILON * value }
}

/// `sum_{l >= start} l^power * (1 - exp(-c * l^(-s)))` for `c * start^(-s) <= 1/2`,
/// expanded as an alternating series of Hurwitz zeta values.
pub(crate) fn power_times_edge_tail(c: f64, s: f64, power: u32, start: f64) -> Bounded {
    let mut acc = CompensatedSum::new();
    let mut error = 0.0;
    let mut coef = 1.0; // c^m / m!
    let mut prev_mag = f64::INFINITY;
    let mut m = 1u32;
    loop {
        coef *= c / m as f64;
        let exponent = m as f64 * s - power as f64;
        let z = hurwitz_zeta(exponent, start);
        let term = coef * z.value;
        error += coef * z.error;
        let mag = libm::fabs(term);
        let converged = mag <= 1e-17 * libm::fabs(acc.value()) && mag < prev_mag;
        if converged || coef == 0.0 {
            // alternating with decreasing magnitude: truncation bounded by the first omitted term
            error += mag;
            break;
        }
        if m % 2 == 1 {
            acc.add(term);
        } else {
            acc.add(-term);
        }
        prev_mag = mag;
        m += 1;
    }
    let value = acc.value();
    Bounded { value, error: error + 8.0 * f64::EPSILON * libm::fabs(value) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_two_is_pi_squared_over_six() {
        let z = hurwitz_zeta(2.0, 1.0);
        let exact = core::f64::consts::PI * core::f64::consts::PI / 6.0;
        assert!((z.value - exact).abs() < 1e-14, "{}", z.value);
        assert!(z.error < 1e-13);
    }

    #[test]
    fn zeta_shifted_matches_direct_difference() {
        // zeta(3, 5) = zeta(3) - 1 - 1/8 - 1/27 - 1/64
        let zeta3 = 1.202_056_903_159_594_3;
        let expected = zeta3 - 1.0 - 0.125 - 1.0 / 27.0 - 1.0 / 64.0;
        let z = hurwitz_zeta(3.0, 5.0);
        assert!((z.value - expected).abs() < 1e-15);
    }

    #[test]
    fn zeta_near_one_is_large_and_accurate() {
        // zeta(1.5) = 2.612375348685488...
        let z = hurwitz_zeta(1.5, 1.0);
        assert!((z.value - 2.612_375_348_685_488).abs() < 1e-13);
    }

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn edge_tail_matches_long_direct_sum() {
        // sum_{l >= 40} (1 - exp(-0.3 l^-3)) with brute force to 10^6 plus integral tail
        let (c, s) = (0.3, 3.0);
        let direct = compensated_sum((40..1_000_000).map(|l| -libm::expm1(-c * libm::pow(l as f64, -s))));
        let tail = c * libm::pow(999_999.5, 1.0 - s) / (s - 1.0);
        let got = power_times_edge_tail(c, s, 0, 40.0);
        assert!((got.value - (direct + tail)).abs() < 1e-15, "{} vs {}", got.value, direct + tail);
    }
}
