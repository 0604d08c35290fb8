//! Exact rational arithmetic helpers.
//!
//! Everything on the solve path is a [`Rational`] (a canonical
//! `BigInt / BigInt` fraction). The parsing and lcm helpers are generic over
//! the integer type so fixed-width ratios can use them as well.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("malformed fraction literal {0:?}")]
    Parse(String),
    #[error("zero denominator in {0:?}")]
    DivisionByZero(String),
}

/// Parses `"p"` or `"p/q"` into a canonical ratio.
///
/// The numerator may carry a sign, the denominator may not.
pub fn parse_ratio<T>(text: &str) -> Result<Ratio<T>, NumericError>
where
    T: Integer + Clone + Signed + FromStr,
{
    let text = text.trim();
    let bad = || NumericError::Parse(text.to_string());
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (text, None),
    };
    if !is_integer_literal(num, true) {
        return Err(bad());
    }
    let numer: T = num.parse().map_err(|_| bad())?;
    let denom: T = match den {
        None => T::one(),
        Some(d) => {
            if !is_integer_literal(d, false) {
                return Err(bad());
            }
            d.parse().map_err(|_| bad())?
        }
    };
    if denom.is_zero() {
        return Err(NumericError::DivisionByZero(text.to_string()));
    }
    Ok(Ratio::new(numer, denom))
}

fn is_integer_literal(s: &str, allow_sign: bool) -> bool {
    let digits = if allow_sign {
        s.strip_prefix(['-', '+']).unwrap_or(s)
    } else {
        s
    };
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// Parses a fraction literal into a [`Rational`].
pub fn rat_of_string(text: &str) -> Result<Rational, NumericError> {
    parse_ratio::<BigInt>(text)
}

/// Formats a ratio as `"p/q"`, or `"p"` when the denominator is one.
pub fn format_ratio<T>(value: &Ratio<T>) -> String
where
    T: Integer + Clone + fmt::Display,
{
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Least common multiple of all denominators; `1` for an empty list.
pub fn common_denominator<T>(values: &[Ratio<T>]) -> T
where
    T: Integer + Clone,
{
    values
        .iter()
        .fold(T::one(), |acc, v| acc.lcm(v.denom()))
}

/// Convenience constructor for small literals in code and tests.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// `true` when the value is exactly 0 or exactly 1.
pub fn is_zero_one<T: Integer + Clone>(value: &Ratio<T>) -> bool {
    value.is_zero() || value.is_one()
}

/// Smallest integer `>= value`.
pub fn ceil_to_integer(value: &Rational) -> BigInt {
    value.ceil().to_integer()
}

/// Certified enclosure `lower <= ln(x) <= upper` with `upper - lower <= tol`.
///
/// Uses `ln x = k ln 2 + ln m` with `m` in `[1, 2)` and the series
/// `ln m = 2 * sum z^(2j+1) / (2j+1)`, `z = (m-1)/(m+1) <= 1/3`.
/// Every partial sum is a lower bound; the geometric tail bound
/// `2 z^(2n+1) / ((2n+1)(1-z^2))` gives the upper bound.
///
/// Panics if `x <= 0` or `tol <= 0`.
pub fn ln_bounds(x: &Rational, tol: &Rational) -> (Rational, Rational) {
    assert!(x.is_positive(), "ln of non-positive value");
    assert!(tol.is_positive(), "tolerance must be positive");
    if *x < Rational::one() {
        let (lo, hi) = ln_bounds(&x.recip(), tol);
        return (-hi, -lo);
    }
    let two = int(2);
    let mut k: u64 = 0;
    let mut m = x.clone();
    while m >= two {
        m /= &two;
        k += 1;
    }
    // Split the tolerance between the ln 2 multiple and the mantissa term.
    let share = tol / int(2 * (k as i64 + 1));
    let (ln2_lo, ln2_hi) = atanh_series_bounds(&int(3).recip(), &share);
    let z = (&m - Rational::one()) / (&m + Rational::one());
    let (m_lo, m_hi) = atanh_series_bounds(&z, &share);
    let kk = int(k as i64);
    (&kk * ln2_lo + m_lo, &kk * ln2_hi + m_hi)
}

/// Bounds on `2 * atanh(z)` for `0 <= z < 1`.
fn atanh_series_bounds(z: &Rational, tol: &Rational) -> (Rational, Rational) {
    let two = int(2);
    let z2 = z * z;
    let tail_den = Rational::one() - &z2;
    let mut sum = Rational::zero();
    let mut power = z.clone();
    let mut j: i64 = 0;
    loop {
        sum += &two * &power / int(2 * j + 1);
        power = &power * &z2;
        j += 1;
        let tail = &two * &power / (int(2 * j + 1) * &tail_den);
        if tail <= *tol {
            let upper = &sum + tail;
            return (sum, upper);
        }
    }
}

/// Serde adapter storing a [`Rational`] as a fraction string.
pub mod serde_fraction {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        rat_of_string(&text).map_err(serde::de::Error::custom)
    }
}
