//! Numeric modes.
//!
//! Every chain, network and linear solve in the crate is generic over a
//! [`Scalar`]. Two implementations exist: [`Rational`] (arbitrary precision,
//! used for exact verification) and `f64` (used for simulation and for graphs
//! too large for exact arithmetic). Mixing the two is a type error; the
//! runtime [`NumericMode`] tag only appears at the file/CLI boundary.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericMode {
    Rational,
    Double,
}

impl NumericMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NumericMode::Rational => "rational",
            NumericMode::Double => "double",
        }
    }
}

impl Display for NumericMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NumericMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" | "exact" => Ok(NumericMode::Rational),
            "double" | "float" | "f64" => Ok(NumericMode::Double),
            other => Err(Error::parse(0, format!("unknown numeric mode `{other}`"))),
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const MODE: NumericMode;

    fn to_f64(&self) -> f64;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_f64_lossy(value: f64) -> Self;

    /// Exact rational value (for doubles, the exact binary value).
    fn to_rational(&self) -> Rational;

    /// Nearest representable value.
    fn from_rational(value: &Rational) -> Self;

    fn abs_val(&self) -> Self;

    /// Magnitude used to rank pivot candidates in elimination.
    fn pivot_rank(&self) -> f64;

    /// Whether `self` should be treated as zero. Exact for rationals,
    /// relative to `scale` for doubles.
    fn is_negligible(&self, scale: f64) -> bool;

    /// Parse a numeric token: an integer, a fraction `p/q` or a decimal.
    fn parse_token(token: &str) -> Option<Self>;

    /// Row-sum tolerance for stochastic matrices.
    fn sums_to_one(&self) -> bool;

    fn is_exact() -> bool {
        Self::MODE == NumericMode::Rational
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Double;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64_lossy(value: f64) -> Self {
        value
    }

    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).unwrap_or_else(Rational::zero)
    }

    fn from_rational(value: &Rational) -> Self {
        ToPrimitive::to_f64(value).unwrap_or(f64::NAN)
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn pivot_rank(&self) -> f64 {
        self.abs()
    }

    fn is_negligible(&self, scale: f64) -> bool {
        self.abs() <= 1e-300_f64.max(scale * 1e-14)
    }

    fn parse_token(token: &str) -> Option<Self> {
        if let Some((p, q)) = token.split_once('/') {
            let p: f64 = p.trim().parse().ok()?;
            let q: f64 = q.trim().parse().ok()?;
            if q == 0.0 {
                return None;
            }
            Some(p / q)
        } else {
            token.trim().parse().ok()
        }
    }

    fn sums_to_one(&self) -> bool {
        (self - 1.0).abs() <= 1e-12
    }
}

impl Scalar for Rational {
    const MODE: NumericMode = NumericMode::Rational;

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64_lossy(value: f64) -> Self {
        Rational::from_float(value).unwrap_or_else(Rational::zero)
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn pivot_rank(&self) -> f64 {
        // Any nonzero pivot is exact; prefer small denominators to limit growth.
        if self.is_zero() {
            0.0
        } else {
            1.0 / (1.0 + self.denom().bits() as f64 + self.numer().bits() as f64)
        }
    }

    fn is_negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }

    fn parse_token(token: &str) -> Option<Self> {
        parse_rational(token.trim())
    }

    fn sums_to_one(&self) -> bool {
        self.is_one()
    }
}

/// Parse `p`, `p/q` or a plain decimal such as `-0.125` exactly.
pub fn parse_rational(token: &str) -> Option<Rational> {
    if let Some((p, q)) = token.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    let (negative, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token.strip_prefix('+').unwrap_or(token)),
    };
    let value = if let Some((int, frac)) = body.split_once('.') {
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        let digits = format!("{}{}", if int.is_empty() { "0" } else { int }, frac);
        let numer: BigInt = digits.parse().ok()?;
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        Rational::new(numer, denom)
    } else {
        Rational::from_integer(body.parse().ok()?)
    };
    Some(if negative { -value } else { value })
}

/// Format a scalar for text output. Rationals print as `p/q`, doubles with
/// the shortest round-trip representation.
pub fn format_scalar<S: Scalar>(value: &S) -> String {
    format!("{value}")
}
