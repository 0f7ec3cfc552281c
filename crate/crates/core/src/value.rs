//! Exact values shared by the oracles, the estimators and the reports.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

/// Reduced fraction with a positive denominator.
pub type Rational = Ratio<i64>;

/// A packing or covering value: a finite fraction or the `+inf` sentinel.
///
/// The sentinel stands for the packing number of a rank-0 matroid, the
/// covering number of a matroid with loops, and "no estimate yet".
/// `Finite(_) < Infinite` in the derived order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimate {
    Finite(Rational),
    Infinite,
}

impl Estimate {
    pub fn finite(num: i64, den: i64) -> Self {
        Estimate::Finite(Rational::new(num, den))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Estimate::Infinite)
    }

    pub fn as_finite(&self) -> Option<Rational> {
        match self {
            Estimate::Finite(r) => Some(*r),
            Estimate::Infinite => None,
        }
    }

    /// `num / den`, or the sentinel when `den == 0`.
    pub fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Estimate::Infinite
        } else {
            Estimate::Finite(Rational::new(num as i64, den as i64))
        }
    }

    /// Reciprocal; `1/0` maps to the sentinel and `1/inf` to zero.
    pub fn recip(&self) -> Self {
        match self {
            Estimate::Finite(r) if r.is_zero() => Estimate::Infinite,
            Estimate::Finite(r) => Estimate::Finite(r.recip()),
            Estimate::Infinite => Estimate::Finite(Rational::zero()),
        }
    }

    /// Whether `self` lies in `[(1 - eps) * truth, (1 + eps) * truth]`.
    /// An infinite truth is matched only by an infinite estimate.
    pub fn within(&self, truth: &Estimate, eps: Rational) -> bool {
        match (self, truth) {
            (Estimate::Infinite, Estimate::Infinite) => true,
            (Estimate::Finite(got), Estimate::Finite(want)) => {
                let lo = (Rational::one() - eps) * want;
                let hi = (Rational::one() + eps) * want;
                lo <= *got && *got <= hi
            }
            _ => false,
        }
    }

    /// Closed interval `[(1 - eps) * self, (1 + eps) * self]` as strings.
    pub fn interval(&self, eps: Rational) -> (Estimate, Estimate) {
        match self {
            Estimate::Infinite => (Estimate::Infinite, Estimate::Infinite),
            Estimate::Finite(v) => (
                Estimate::Finite((Rational::one() - eps) * v),
                Estimate::Finite((Rational::one() + eps) * v),
            ),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Estimate::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Estimate::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimate::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Estimate::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse `{0}` as an exact fraction")]
pub struct ParseValueError(pub String);

impl FromStr for Estimate {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(Estimate::Infinite);
        }
        parse_rational(s).map(Estimate::Finite)
    }
}

/// Parses `"3/4"`, `"2"` or a plain decimal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, ParseValueError> {
    let err = || ParseValueError(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    if frac.len() > 15 {
        return Err(err());
    }
    let den = 10i64.pow(frac.len() as u32);
    let int_part: i64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| err())?
    };
    let frac_part: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| err())?
    };
    let num = int_part
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac_part))
        .ok_or_else(err)?;
    Ok(Rational::new(if neg { -num } else { num }, den))
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
