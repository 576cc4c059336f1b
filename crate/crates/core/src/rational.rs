//! Exact rational numbers and conversions from floating point.
//!
//! Every probability, covariance and measurement time in the crate is held as
//! an arbitrary-precision rational in lowest terms. Irrational inputs such as
//! `1/sqrt(2)` enter through [`rationalize`], which picks the continued
//! fraction convergent with the smallest denominator inside a tolerance.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Default rationalization tolerance for irrational inputs.
pub const DEFAULT_PRECISION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RationalError {
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("non-finite value {0}")]
    NonFinite(String),
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `n`, `n/d` or a plain decimal such as `-0.25` into an exact value.
pub fn parse_rational(text: &str) -> Result<Rational, RationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalError::Malformed(text.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_int(num.trim()).ok_or_else(|| RationalError::Malformed(s.to_string()))?;
        let den = parse_int(den.trim()).ok_or_else(|| RationalError::Malformed(s.to_string()))?;
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RationalError::Malformed(s.to_string()));
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RationalError::Malformed(s.to_string()));
        }
        let mantissa = BigInt::from_str(&format!("{digits}{frac}"))
            .map_err(|_| RationalError::Malformed(s.to_string()))?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let value = Rational::new(mantissa, scale);
        return Ok(if negative { -value } else { value });
    }
    parse_int(s)
        .map(Rational::from_integer)
        .ok_or_else(|| RationalError::Malformed(s.to_string()))
}

fn parse_int(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s.strip_prefix('+').unwrap_or(s)).ok()
}

/// Formats as `num/den`, or just `num` for integers.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Formats always as `num/den`, the form used on the wire.
pub fn format_fraction(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Smallest-denominator continued fraction convergent within `tolerance` of `x`.
///
/// Values that are exactly representable as `f64` dyadics are still approximated
/// by convergents, so `0.5` yields `1/2` and `cos(pi/2)` (about 6e-17) yields `0`.
pub fn rationalize(x: f64, tolerance: f64) -> Result<Rational, RationalError> {
    if !x.is_finite() {
        return Err(RationalError::NonFinite(x.to_string()));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(RationalError::BadTolerance(tolerance.to_string()));
    }
    // Work on the exact binary value of x so the expansion never drifts.
    let exact = Rational::from_float(x).ok_or_else(|| RationalError::NonFinite(x.to_string()))?;
    let tol = Rational::from_float(tolerance).expect("finite tolerance");

    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut rest = exact.clone();
    loop {
        let a = rest.floor().to_integer();
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let candidate = Rational::new(h.clone(), k.clone());
        let frac = &rest - Rational::from_integer(a);
        if (&candidate - &exact).abs() < tol || frac.is_zero() {
            return Ok(candidate);
        }
        rest = frac.recip();
    }
}

pub fn abs_error(x: f64, approx: &Rational) -> f64 {
    match Rational::from_float(x) {
        Some(exact) => to_f64(&(exact - approx).abs()),
        None => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("1/4").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational(" -2/4 ").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational("0.1").unwrap(), ratio(1, 10));
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "1/", "/2", "a/b", "1.2.3", "1e5", "--1", "1/0"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn format_round_trips() {
        for text in ["1/4", "-7/3", "0", "12"] {
            let r = parse_rational(text).unwrap();
            assert_eq!(format_rational(&r), text);
        }
        assert_eq!(format_fraction(&int(2)), "2/1");
    }

    #[test]
    fn rationalize_inverse_sqrt2() {
        let x = std::f64::consts::FRAC_1_SQRT_2;
        let r = rationalize(x, 1e-9).unwrap();
        assert!(abs_error(x, &r) < 1e-9);
        // Convergents of 1/sqrt(2) have denominators from the Pell sequence.
        assert!(r.denom() < &BigInt::from(100_000));
    }

    #[test]
    fn rationalize_snaps_tiny_values_to_zero() {
        let r = rationalize((std::f64::consts::FRAC_PI_2).cos(), 1e-9).unwrap();
        assert!(r.is_zero());
        assert_eq!(rationalize(0.5, 1e-9).unwrap(), ratio(1, 2));
        assert_eq!(rationalize(-1.0, 1e-9).unwrap(), int(-1));
    }

    #[test]
    fn rationalize_rejects_bad_inputs() {
        assert!(rationalize(f64::NAN, 1e-9).is_err());
        assert!(rationalize(0.3, 0.0).is_err());
    }
}
