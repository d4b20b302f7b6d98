//! Exact rational time values.
//!
//! All times and delays are kept as arbitrary-precision rationals so that
//! interval arithmetic such as `3 - 0.2` stays exact.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Time in abstract units.
pub type Rational = BigRational;

/// Builds `numer / denom`. Panics if `denom` is zero.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RationalParseError {
    Empty,
    Malformed(String),
    ZeroDenominator,
}

impl fmt::Display for RationalParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalParseError::Empty => write!(f, "empty number"),
            RationalParseError::Malformed(s) => write!(f, "malformed number '{s}'"),
            RationalParseError::ZeroDenominator => write!(f, "fraction has a zero denominator"),
        }
    }
}

fn digits(s: &str) -> Result<BigInt, RationalParseError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(RationalParseError::Malformed(s.to_string()));
    }
    s.parse::<BigInt>()
        .map_err(|_| RationalParseError::Malformed(s.to_string()))
}

/// Parses a non-negative decimal (`0.25`, `3`) or fraction (`7/3`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational, RationalParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(RationalParseError::Empty);
    }
    if let Some((numer, denom)) = text.split_once('/') {
        let numer = digits(numer)?;
        let denom = digits(denom)?;
        if denom.is_zero() {
            return Err(RationalParseError::ZeroDenominator);
        }
        return Ok(Rational::new(numer, denom));
    }
    match text.split_once('.') {
        Some((whole, frac)) => {
            let whole = digits(whole)?;
            let frac_value = digits(frac)?;
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            Ok(Rational::new(whole * &scale + frac_value, scale))
        }
        None => Ok(Rational::from_integer(digits(text)?)),
    }
}

/// Formats a rational as an exact decimal when the expansion terminates,
/// otherwise as `p/q`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut denom = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while denom.is_multiple_of(&two) {
        denom /= &two;
        twos += 1;
    }
    while denom.is_multiple_of(&five) {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let scaled = value * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let scaled = scaled.to_integer();
    let sign = if scaled.is_negative() { "-" } else { "" };
    let magnitude = scaled.abs().to_string();
    let padded = format!("{magnitude:0>width$}", width = places + 1);
    let (whole, frac) = padded.split_at(padded.len() - places);
    format!("{sign}{whole}.{frac}")
}
