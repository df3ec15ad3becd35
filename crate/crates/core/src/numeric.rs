//! Scalar abstraction shared by the exact-rational and floating-point modes.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. In exact mode
//! (`Rational`) all comparisons ignore the tolerance argument; in float mode
//! (`f64`) comparisons use a mixed absolute/relative band
//! `|a - b| <= tol * max(1, |a|, |b|)`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Arbitrary-precision rational used by exact mode.
pub type Rational = BigRational;

/// Default relative tolerance for float mode.
pub const DEFAULT_TOL: f64 = 1e-9;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + PartialEq
    + num_traits::Num
    + std::ops::Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True for exact arithmetic; tolerances are then ignored.
    const EXACT: bool;

    /// Converts an `f64`. Rationals use the shortest decimal representation,
    /// so `0.6` becomes `3/5` rather than its binary expansion.
    fn from_f64(x: f64) -> Self;
    fn as_f64(&self) -> f64;

    fn to_rational(&self) -> Rational;
    fn from_rational(r: &Rational) -> Self;

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }

    /// Effective tolerance: `tol` in float mode, zero in exact mode.
    fn eff_tol(tol: f64) -> f64 {
        if Self::EXACT {
            0.0
        } else {
            tol
        }
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    /// Tolerance band scaled to the magnitudes involved.
    fn band(a: &Self, b: &Self, tol: f64) -> Self {
        if Self::EXACT || tol == 0.0 {
            return Self::zero();
        }
        let scale = Self::max_of(&Self::one(), &Self::max_of(&a.abs_val(), &b.abs_val()));
        scale * Self::from_f64(tol)
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).abs_val() <= Self::band(self, other, tol)
    }

    /// `self >= other` up to tolerance.
    fn approx_ge(&self, other: &Self, tol: f64) -> bool {
        self.clone() + Self::band(self, other, tol) >= *other
    }

    /// `self <= other` up to tolerance.
    fn approx_le(&self, other: &Self, tol: f64) -> bool {
        other.approx_ge(self, tol)
    }

    /// Strictly positive beyond the tolerance band.
    fn is_positive_tol(&self, tol: f64) -> bool {
        *self > Self::band(self, &Self::zero(), tol)
    }

    /// Rounds down onto the dyadic grid `k / 2^bits` (exact mode only; keeps
    /// denominators bounded during long descent runs). Identity for floats.
    fn floor_dyadic(&self, bits: u32) -> Self;

    /// Canonical text: `p/q` (or `p`) in exact mode, shortest decimal otherwise.
    fn to_text(&self) -> String;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Self {
        x
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Rational {
        <Rational as Scalar>::from_f64(*self)
    }

    fn from_rational(r: &Rational) -> Self {
        Scalar::as_f64(r)
    }

    fn floor_dyadic(&self, _bits: u32) -> Self {
        *self
    }

    fn to_text(&self) -> String {
        format_sig(*self, 12)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_f64(x: f64) -> Self {
        rational_from_decimal(&format!("{x}")).unwrap_or_else(|| {
            BigRational::from_float(x).expect("finite value required for exact conversion")
        })
    }

    fn as_f64(&self) -> f64 {
        // numerator / denominator can overflow f64 individually for long
        // descent runs; fall back to a scaled division.
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self
                    .denom()
                    .bits()
                    .max(self.numer().bits())
                    .saturating_sub(900);
                let n = (self.numer() >> shift).to_f64().unwrap_or(f64::NAN);
                let d = (self.denom() >> shift).to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn floor_dyadic(&self, bits: u32) -> Self {
        let scale = BigInt::one() << bits;
        let scaled = self * BigRational::from_integer(scale.clone());
        BigRational::new(scaled.floor().to_integer(), scale)
    }

    fn to_text(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Parses a decimal literal such as `-12.5e-3` into an exact rational.
pub fn rational_from_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i64>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&digits).ok()?);
    let exp10 = exponent - frac_part.len() as i64;
    let ten = BigRational::from_integer(BigInt::from(10));
    if exp10 >= 0 {
        value *= num_traits::pow(ten, exp10 as usize);
    } else {
        value /= num_traits::pow(ten, (-exp10) as usize);
    }
    Some(if negative { -value } else { value })
}

/// Parses `"p/q"`, `"p"` or a decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    match text.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).ok()?;
            let q = BigInt::from_str(q.trim()).ok()?;
            if q.is_zero() {
                None
            } else {
                Some(BigRational::new(p, q))
            }
        }
        None => rational_from_decimal(text),
    }
}

/// Rounds to `digits` significant digits and prints the shortest decimal form.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded = round_sig(x, digits);
    format!("{rounded}")
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Converts a slice of scalars to `f64`.
pub fn to_f64_vec<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(Scalar::as_f64).collect()
}

/// Converts a slice of `f64` to scalars.
pub fn from_f64_vec<T: Scalar>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::from_f64(x)).collect()
}

pub fn sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |acc, x| acc + x)
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}
