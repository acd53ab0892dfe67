//! Exact decimal probabilities.
//!
//! Every probability in a model is a finite decimal literal, and the checker
//! only adds and multiplies, so a big decimal is closed under everything we
//! need. Tail masses such as `0.9999999995 - 0.995` survive without rounding.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;
use std::sync::Arc;

use bigdecimal::BigDecimal;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbError {
    #[error("`{0}` is not a decimal number")]
    Syntax(String),
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(String),
}

/// A non-negative exact decimal. Construction from text checks `[0, 1]`;
/// arithmetic does not, since partial sums are allowed to be anything.
#[derive(Clone)]
pub struct Prob(Arc<BigDecimal>);

impl Prob {
    pub fn zero() -> Self {
        Prob(Arc::new(BigDecimal::zero()))
    }

    pub fn one() -> Self {
        Prob(Arc::new(BigDecimal::one()))
    }

    pub fn from_decimal(d: BigDecimal) -> Self {
        Prob(Arc::new(d))
    }

    /// Parses a plain decimal (`0.98`, `5e-10`, `1`) in `[0, 1]`.
    pub fn parse(text: &str) -> Result<Self, ProbError> {
        let t = text.trim();
        if t.is_empty() || t.starts_with('+') || t.contains(|c: char| c.is_whitespace()) {
            return Err(ProbError::Syntax(text.to_string()));
        }
        let d = BigDecimal::from_str(t).map_err(|_| ProbError::Syntax(text.to_string()))?;
        let p = Prob::from_decimal(d.normalized());
        if !p.in_unit_interval() {
            return Err(ProbError::OutOfRange(text.to_string()));
        }
        Ok(p)
    }

    /// Parses a percentage such as `99.99999995` into `0.9999999995`.
    pub fn parse_percent(text: &str) -> Result<Self, ProbError> {
        let d = BigDecimal::from_str(text.trim()).map_err(|_| ProbError::Syntax(text.to_string()))?;
        let (digits, scale) = d.as_bigint_and_exponent();
        let p = Prob::from_decimal(BigDecimal::new(digits, scale + 2).normalized());
        if !p.in_unit_interval() {
            return Err(ProbError::OutOfRange(format!("{text}%")));
        }
        Ok(p)
    }

    pub fn decimal(&self) -> &BigDecimal {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn in_unit_interval(&self) -> bool {
        !self.is_negative() && *self.0 <= BigDecimal::one()
    }

    pub fn is_negative(&self) -> bool {
        *self.0 < BigDecimal::zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `1 - self`.
    pub fn complement(&self) -> Prob {
        &Prob::one() - self
    }

    /// Plain positional text, trailing zeros trimmed. Always re-parses to
    /// the same value.
    pub fn to_plain_string(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        self.0.normalized().to_plain_string()
    }

    /// Rounds to `digits` significant decimal places after the point.
    pub fn to_rounded_string(&self, digits: u32) -> String {
        let r = self.0.with_scale_round(digits as i64, bigdecimal::RoundingMode::HalfEven);
        Prob::from_decimal(r).to_plain_string()
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_plain_string())
    }
}

impl fmt::Debug for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prob({})", self.to_plain_string())
    }
}

impl PartialEq for Prob {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for Prob {}

impl PartialOrd for Prob {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Prob {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl FromStr for Prob {
    type Err = ProbError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Prob::parse(s)
    }
}

impl Add for &Prob {
    type Output = Prob;
    fn add(self, rhs: &Prob) -> Prob {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        Prob::from_decimal(&*self.0 + &*rhs.0)
    }
}

impl Sub for &Prob {
    type Output = Prob;
    fn sub(self, rhs: &Prob) -> Prob {
        Prob::from_decimal(&*self.0 - &*rhs.0)
    }
}

impl Mul for &Prob {
    type Output = Prob;
    fn mul(self, rhs: &Prob) -> Prob {
        if self.is_one() {
            return rhs.clone();
        }
        if rhs.is_one() {
            return self.clone();
        }
        if self.is_zero() || rhs.is_zero() {
            return Prob::zero();
        }
        Prob::from_decimal(&*self.0 * &*rhs.0)
    }
}

impl std::iter::Sum for Prob {
    fn sum<I: Iterator<Item = Prob>>(iter: I) -> Prob {
        iter.fold(Prob::zero(), |acc, p| &acc + &p)
    }
}

/// Scalar used by value iteration. `Prob` gives exact answers, `f64` is the
/// fast path for large sweeps.
pub trait Weight: Clone + PartialOrd + Send + Sync + fmt::Debug + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_prob(p: &Prob) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn to_f64(&self) -> f64;
    /// Full-precision text.
    fn render(&self) -> String;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_prob(p: &Prob) -> Self {
        p.to_f64()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl Weight for Prob {
    fn zero() -> Self {
        Prob::zero()
    }
    fn one() -> Self {
        Prob::one()
    }
    fn from_prob(p: &Prob) -> Self {
        p.clone()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn to_f64(&self) -> f64 {
        Prob::to_f64(self)
    }
    fn render(&self) -> String {
        self.to_plain_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prob {
        Prob::parse(s).unwrap()
    }

    #[test]
    fn small_differences_are_exact() {
        assert_eq!(&p("0.9999999995") - &p("0.995"), p("0.0049999995"));
        assert_eq!(&p("1") - &p("0.9999999995"), p("5e-10"));
        assert_eq!((&p("1") - &p("0.9999999995")).to_plain_string(), "0.0000000005");
    }

    #[test]
    fn equality_ignores_scale() {
        assert_eq!(p("0.80"), p("0.8"));
        assert_eq!(p("1.000"), Prob::one());
    }

    #[test]
    fn percent_shifts_two_places() {
        assert_eq!(Prob::parse_percent("99.99999995").unwrap(), p("0.9999999995"));
        assert_eq!(Prob::parse_percent("10").unwrap(), p("0.1"));
        assert!(Prob::parse_percent("101").is_err());
    }

    #[test]
    fn rejects_out_of_range_and_junk() {
        assert!(matches!(Prob::parse("1.5"), Err(ProbError::OutOfRange(_))));
        assert!(matches!(Prob::parse("-0.1"), Err(ProbError::OutOfRange(_))));
        assert!(matches!(Prob::parse("abc"), Err(ProbError::Syntax(_))));
        assert!(matches!(Prob::parse(""), Err(ProbError::Syntax(_))));
    }

    #[test]
    fn plain_string_round_trips() {
        for s in ["0", "1", "0.98", "0.9999999995", "0.000005", "0.9999874114988752"] {
            assert_eq!(p(&p(s).to_plain_string()), p(s));
        }
        assert_eq!(p("0.50").to_plain_string(), "0.5");
    }

    #[test]
    fn rounding_for_display() {
        assert_eq!(p("0.9999874825").to_rounded_string(6), "0.999987");
        assert_eq!(p("0.25").to_rounded_string(10), "0.25");
    }
}
