//! Numeric abstraction shared by scores, metrics and agreement statistics.
//!
//! Everything that averages, compares against thresholds or forms ratios is
//! written against [`Scalar`], so the same code runs over `f32`, `f64` or an
//! exact rational. Tests lean on the rational instantiation to compare
//! aggregation and metric results with brute-force oracles without any
//! floating-point slack.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// A number usable as a score, threshold operand or rate.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Exact conversion of a count.
    fn from_count(n: usize) -> Self;

    /// Conversion from a wire or config value. Rationals pick the simplest
    /// fraction that round-trips.
    fn from_f64(x: f64) -> Self;

    fn to_f64(self) -> f64;

    /// `num / den`, or `None` when the denominator is zero.
    fn ratio(num: usize, den: usize) -> Option<Self> {
        (den != 0).then(|| Self::from_count(num) / Self::from_count(den))
    }

    fn is_unit_interval(self) -> bool {
        self >= Self::zero() && self <= Self::one()
    }
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }
    fn from_f64(x: f64) -> Self {
        Ratio::approximate_float(x).expect("value is not representable as Ratio<i64>")
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

/// Largest element, or `None` for an empty iterator.
pub(crate) fn max_of<S: Scalar>(values: impl IntoIterator<Item = S>) -> Option<S> {
    values
        .into_iter()
        .fold(None, |acc, v| match acc {
            Some(m) if m >= v => Some(m),
            _ => Some(v),
        })
}
