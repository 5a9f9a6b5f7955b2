//! Reals that remember an exact rational value when one is known.
//!
//! Case thresholds of the rate oracle are compared exactly when every input
//! was given as a terminating decimal; otherwise a guard band is used.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Half-width of the band inside which two floating values are treated as equal.
pub const GUARD_BAND: f64 = 1e-12;

/// A real number with an optional exact rational shadow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real {
    value: f64,
    exact: Option<Ratio<i128>>,
}

/// Result of comparing two [`Real`]s.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Equal,
    Greater,
}

impl Real {
    pub fn float(value: f64) -> Self {
        Self { value, exact: None }
    }

    pub fn rational(num: i128, den: i128) -> Self {
        let r = Ratio::new(num, den);
        Self {
            value: ratio_to_f64(&r),
            exact: Some(r),
        }
    }

    pub fn integer(n: i64) -> Self {
        Self::rational(n as i128, 1)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn recip(self) -> Self {
        Real::integer(1) / self
    }

    pub fn max(self, other: Self) -> Self {
        match self.compare(&other) {
            Comparison::Less => other,
            _ => self,
        }
    }

    pub fn positive_part(self) -> Self {
        self.max(Real::integer(0))
    }

    /// Exact comparison when both sides are rational, guarded float comparison otherwise.
    pub fn compare(&self, other: &Self) -> Comparison {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => match a.cmp(&b) {
                Ordering::Less => Comparison::Less,
                Ordering::Equal => Comparison::Equal,
                Ordering::Greater => Comparison::Greater,
            },
            _ => {
                let diff = self.value - other.value;
                if diff.abs() <= GUARD_BAND * (1.0 + self.value.abs().max(other.value.abs())) {
                    if diff != 0.0 {
                        log::warn!(
                            "floating comparison of {} and {} fell inside the guard band",
                            self.value,
                            other.value
                        );
                    }
                    Comparison::Equal
                } else if diff < 0.0 {
                    Comparison::Less
                } else {
                    Comparison::Greater
                }
            }
        }
    }

    pub fn lt(&self, other: &Self) -> bool {
        self.compare(other) == Comparison::Less
    }

    pub fn le(&self, other: &Self) -> bool {
        self.compare(other) != Comparison::Greater
    }

    pub fn gt(&self, other: &Self) -> bool {
        self.compare(other) == Comparison::Greater
    }

    pub fn ge(&self, other: &Self) -> bool {
        self.compare(other) != Comparison::Less
    }

    pub fn eq_exact(&self, other: &Self) -> bool {
        self.compare(other) == Comparison::Equal
    }
}

fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

fn lift(
    a: Real,
    b: Real,
    float: impl Fn(f64, f64) -> f64,
    exact: impl Fn(&Ratio<i128>, &Ratio<i128>) -> Option<Ratio<i128>>,
) -> Real {
    let exact = match (a.exact, b.exact) {
        (Some(x), Some(y)) => exact(&x, &y),
        _ => None,
    };
    match exact {
        Some(r) => Real {
            value: ratio_to_f64(&r),
            exact: Some(r),
        },
        None => Real::float(float(a.value, b.value)),
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        lift(self, rhs, |a, b| a + b, |a, b| a.checked_add(b))
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        lift(self, rhs, |a, b| a - b, |a, b| a.checked_sub(b))
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        lift(self, rhs, |a, b| a * b, |a, b| a.checked_mul(b))
    }
}

impl Div for Real {
    type Output = Real;
    fn div(self, rhs: Real) -> Real {
        lift(
            self,
            rhs,
            |a, b| a / b,
            |a, b| if b.is_zero() { None } else { a.checked_div(b) },
        )
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real {
            value: -self.value,
            exact: self.exact.map(|r| -r),
        }
    }
}

impl From<f64> for Real {
    fn from(value: f64) -> Self {
        Real::float(value)
    }
}

impl FromStr for Real {
    type Err = Error;

    /// Parses decimals (`0.2`, `-1.5`, `4`, `1e-3`) exactly; `inf` is accepted as a float.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("not a number: {s:?}"));
        if let Some(r) = parse_decimal(s) {
            return Ok(Real {
                value: s.parse::<f64>().map_err(|_| bad())?,
                exact: Some(r),
            });
        }
        let value: f64 = s.parse().map_err(|_| bad())?;
        Ok(Real::float(value))
    }
}

fn parse_decimal(s: &str) -> Option<Ratio<i128>> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer: i128 = if all.is_empty() { 0 } else { all.parse().ok()? };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    if scale.unsigned_abs() > 30 {
        return None;
    }
    let pow = 10i128.checked_pow(scale.unsigned_abs())?;
    Some(if scale >= 0 {
        Ratio::from_integer(numer.checked_mul(pow)?)
    } else {
        Ratio::new(numer, pow)
    })
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        // Round-trip through the shortest decimal representation keeps user inputs exact.
        Ok(format!("{v}").parse().unwrap_or(Real::float(v)))
    }
}
