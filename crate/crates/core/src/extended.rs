//! Extended reals on `(-inf, +inf]`.
//!
//! Energies and influences take the value `+inf` when a hard core is violated.
//! The encoding keeps that case separate from the finite range so that
//! `exp(-inf)` is exactly zero and ordering is total.

use core::cmp::Ordering;
use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign};

/// A value in `(-inf, +inf]`. `-inf` is not representable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    /// Maps `+inf` to [`ExtendedReal::Infinite`]. NaN and `-inf` are rejected.
    pub fn from_f64(value: f64) -> Option<Self> {
        if value.is_nan() || value == f64::NEG_INFINITY {
            None
        } else if value == f64::INFINITY {
            Some(ExtendedReal::Infinite)
        } else {
            Some(ExtendedReal::Finite(value))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    /// Lossy conversion; `Infinite` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::Infinite => f64::INFINITY,
        }
    }

    /// `exp(-self)`, exactly `0.0` for `Infinite`.
    pub fn boltzmann(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => libm::exp(-v),
            ExtendedReal::Infinite => 0.0,
        }
    }

    /// `exp(-|self|)`, exactly `0.0` for `Infinite`.
    pub fn abs_boltzmann(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => libm::exp(-libm::fabs(v)),
            ExtendedReal::Infinite => 0.0,
        }
    }

    /// Multiplies by a non-negative integer count; `0 * inf = 0` (an empty sum).
    pub fn times(self, count: u32) -> Self {
        if count == 0 {
            return ExtendedReal::ZERO;
        }
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v * f64::from(count)),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }
}

impl Default for ExtendedReal {
    fn default() -> Self {
        ExtendedReal::ZERO
    }
}

impl From<f64> for ExtendedReal {
    /// Panics on NaN or `-inf`.
    fn from(value: f64) -> Self {
        ExtendedReal::from_f64(value).expect("extended real must lie in (-inf, +inf]")
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl AddAssign for ExtendedReal {
    fn add_assign(&mut self, rhs: ExtendedReal) {
        *self = *self + rhs;
    }
}

impl Sum for ExtendedReal {
    fn sum<I: Iterator<Item = ExtendedReal>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        for v in iter {
            acc.add(v);
        }
        acc.total()
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::Infinite) => Ordering::Less,
            (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => Ordering::Greater,
            (ExtendedReal::Infinite, ExtendedReal::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}

/// Compensated (Neumaier) summation over extended reals.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
    infinite: bool,
}

impl KahanSum {
    pub fn add(&mut self, value: ExtendedReal) {
        match value {
            ExtendedReal::Infinite => self.infinite = true,
            ExtendedReal::Finite(v) => self.add_f64(v),
        }
    }

    pub fn add_f64(&mut self, v: f64) {
        let t = self.sum + v;
        if libm::fabs(self.sum) >= libm::fabs(v) {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> ExtendedReal {
        if self.infinite {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(self.sum + self.compensation)
        }
    }

    pub fn total_f64(&self) -> f64 {
        self.total().to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_absorbs_and_orders_last() {
        let a = ExtendedReal::Finite(3.0);
        assert_eq!(a + ExtendedReal::Infinite, ExtendedReal::Infinite);
        assert!(ExtendedReal::Finite(f64::MAX) < ExtendedReal::Infinite);
        assert_eq!(ExtendedReal::Infinite.boltzmann(), 0.0);
        assert_eq!(ExtendedReal::Infinite.times(0), ExtendedReal::ZERO);
    }

    #[test]
    fn rejects_nan_and_negative_infinity() {
        assert!(ExtendedReal::from_f64(f64::NAN).is_none());
        assert!(ExtendedReal::from_f64(f64::NEG_INFINITY).is_none());
        assert_eq!(ExtendedReal::from_f64(f64::INFINITY), Some(ExtendedReal::Infinite));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add_f64(1.0e16);
        for _ in 0..1000 {
            s.add_f64(1.0);
        }
        s.add_f64(-1.0e16);
        assert_eq!(s.total_f64(), 1000.0);
    }
}
