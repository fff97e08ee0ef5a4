//! Small numerical helpers shared by the evaluators.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};

/// Scalar field the closed-form evaluators are generic over.
///
/// Implemented by `f64` for the production paths and by
/// [`Rational`](crate::exact::Rational) for exact cross-checks.
pub trait Real: Clone + PartialOrd + Num + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn powu(&self, exp: usize) -> Self {
        num_traits::pow(self.clone(), exp)
    }
}

impl<T: Clone + PartialOrd + Num + FromPrimitive + Debug> Real for T {}

/// `(1 - p)^l`, evaluated as `exp(l * ln(1 - p))` for `p < 0.5` so that large
/// user counts keep full relative precision.
pub fn pow_complement(p: f64, l: usize) -> f64 {
    if l == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        1.0
    } else if p >= 1.0 {
        0.0
    } else if p < 0.5 {
        (l as f64 * (-p).ln_1p()).exp()
    } else {
        powu_f64(1.0 - p, l)
    }
}

/// Integer power by squaring; `powi` only takes `i32`.
pub fn powu_f64(base: f64, exp: usize) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

/// `max(x, 0)` with an exact zero.
#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Binomial coefficient in double precision via the multiplicative recurrence.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round_if_exact()
}

trait RoundIfExact {
    fn round_if_exact(self) -> Self;
}

impl RoundIfExact for f64 {
    // The recurrence produces integers exactly up to 2^53 except for
    // last-place drift in the division; snap back when close.
    fn round_if_exact(self) -> Self {
        if self < 9.0e15 {
            let r = self.round();
            if (r - self).abs() <= 1e-6 * r.max(1.0) {
                return r;
            }
        }
        self
    }
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Binomial coefficient in any [`Real`] scalar (exact for rationals).
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_count(n - i) / T::from_count(i + 1);
    }
    acc
}

pub fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm_u128(a: u128, b: u128) -> Option<u128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd_u128(a, b)).checked_mul(b)
}

/// Calls `f` on every `k`-element subset of `{0, .., n-1}` encoded as a bitmask,
/// in increasing numeric order (Gosper's hack).
pub fn for_each_subset_of_size(n: usize, k: usize, mut f: impl FnMut(u64)) {
    assert!(n <= 63, "subset enumeration limited to 63 elements");
    if k > n {
        return;
    }
    if k == 0 {
        f(0);
        return;
    }
    let limit = 1u64 << n;
    let mut mask = (1u64 << k) - 1;
    while mask < limit {
        f(mask);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
}

/// Every `k`-element subset mask of `{0, .., n-1}` in increasing order.
pub fn subsets_of_size(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for_each_subset_of_size(n, k, |m| out.push(m));
    out
}

/// Formats like C's `%.{digits}g`: `digits` significant digits, trailing
/// zeros trimmed, scientific notation only for very large or small magnitudes.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_complement_matches_direct_power() {
        for &p in &[0.0, 1e-9, 0.01, 0.3, 0.5, 0.75, 1.0] {
            for &l in &[0usize, 1, 2, 7, 300] {
                let direct = (1.0 - p as f64).powi(l as i32);
                let v = pow_complement(p, l);
                assert!((v - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-300, "p={p} l={l}");
            }
        }
    }

    #[test]
    fn binomials_agree() {
        for n in 0..40 {
            for k in 0..=n {
                let exact = binomial_u128(n, k).unwrap();
                assert_eq!(binomial_f64(n, k), exact as f64);
                assert_eq!(binomial::<f64>(n, k).round(), exact as f64);
            }
        }
        assert_eq!(binomial_u128(3, 5), Some(0));
    }

    #[test]
    fn subset_enumeration_counts() {
        for n in 0..10 {
            for k in 0..=n {
                let subsets = subsets_of_size(n, k);
                assert_eq!(subsets.len() as u128, binomial_u128(n, k).unwrap());
                assert!(subsets.iter().all(|m| m.count_ones() as usize == k));
                assert!(subsets.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(1.5, 12), "1.5");
        assert_eq!(format_significant(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(format_significant(1234.5, 12), "1234.5");
        assert_eq!(format_significant(1e-7, 12), "1e-07");
        assert_eq!(format_significant(-0.25, 3), "-0.25");
    }

    #[test]
    fn compensated_sum() {
        let v = vec![1.0, 1e-16, 1e-16, 1e-16, 1e-16];
        assert!((neumaier_sum(v) - (1.0 + 4e-16)).abs() < 1e-18);
    }
}
