//! Exact rational arithmetic for oracle and cross-check paths.
//!
//! Every generic evaluator in this crate can be instantiated with [`Rational`];
//! inputs held as `f64` are converted without rounding via [`from_f64`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

pub type Rational = BigRational;

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact binary value of a finite `f64`.
///
/// # Panics
/// On NaN or infinities.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite value")
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn vec_from_f64(xs: &[f64]) -> Vec<Rational> {
    xs.iter().copied().map(from_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        for &x in &[0.0, 0.1, 1.0 / 3.0, 2.5e-17, 1.0] {
            assert_eq!(to_f64(&from_f64(x)), x);
        }
        assert_eq!(rational(2, 4), rational(1, 2));
    }
}
