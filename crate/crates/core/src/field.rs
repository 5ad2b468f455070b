//! Scalar fields used by the exact and floating-point code paths.
//!
//! Most algorithms in this crate (null spaces, ranks, the simplex solver,
//! hull enumeration) are written once against [`Field`] and instantiated for
//! both [`Rational`] and `f64`. Exact instantiations ignore tolerances.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

pub trait Field:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact for rationals; non-finite inputs map to zero.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;

    /// Zero test. `tol` is an absolute threshold and is ignored by exact fields.
    fn is_zero_within(&self, tol: f64) -> bool;

    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }

    /// Sign with a dead zone of width `tol` (ignored by exact fields).
    fn sign_within(&self, tol: f64) -> i8 {
        if self.is_zero_within(tol) {
            0
        } else if self.to_f64() > 0.0 || (Self::EXACT && *self > Self::zero()) {
            1
        } else {
            -1
        }
    }
}

impl Field for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero_within(&self, tol: f64) -> bool {
        self.abs() <= tol
    }
}

impl Field for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        Rational::from_float(v).unwrap_or_else(Zero::zero)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            if self.is_positive() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
    }
    fn is_zero_within(&self, _tol: f64) -> bool {
        Zero::is_zero(self)
    }
    fn sign_within(&self, _tol: f64) -> i8 {
        if Zero::is_zero(self) {
            0
        } else if self.is_positive() {
            1
        } else {
            -1
        }
    }
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"-0.125"` into an
/// exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let negative = mantissa.starts_with('-');
    let digits = mantissa.trim_start_matches(['-', '+']);
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("0{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(all);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

/// `"p/q"` or `"p"` for integers.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Decimal string with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // normalizes -0.0
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Best rational approximation with bounded denominator, used when a float
/// quantity is known to be a simple fraction (e.g. user-supplied derivations).
pub fn rational_from_f64(x: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    // continued fractions
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i128;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let r = v - a as f64;
        if (h1 as f64 / k1 as f64 - x).abs() <= 1e-15 * x.abs().max(1.0) || r.abs() < 1e-300 {
            break;
        }
        v = 1.0 / r;
    }
    if k1 == 0 {
        return None;
    }
    let q = Rational::new(BigInt::from(h1), BigInt::from(k1));
    if (Field::to_f64(&q) - x).abs() <= 1e-12 * x.abs().max(1.0) {
        Some(q)
    } else {
        None
    }
}
