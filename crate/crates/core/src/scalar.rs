//! Numeric abstraction for metric arithmetic.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A number type metrics can be computed in: `f32`, `f64` or an exact rational.
///
/// Only field operations and ordering are required. Anything that needs
/// transcendental functions (p-values) asks for [`FloatScalar`] instead.
pub trait Scalar: Num + FromPrimitive + ToPrimitive + PartialOrd + Copy + Debug {
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// `num / den` computed in `Self`.
    fn ratio(num: u64, den: u64) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn abs_value(self) -> Self {
        if self < Self::zero() {
            Self::zero() - self
        } else {
            self
        }
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Num + FromPrimitive + ToPrimitive + PartialOrd + Copy + Debug {}

/// Floating-point scalar: f32 or f64.
pub trait FloatScalar: Scalar + Float {
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable")
    }
}

impl FloatScalar for f32 {}
impl FloatScalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;

    #[test]
    fn ratio_is_exact_for_rationals() {
        let r: Exact = Scalar::ratio(9, 10);
        assert_eq!(r, Exact::new(9, 10));
        let f: f64 = Scalar::ratio(1, 4);
        assert_eq!(f, 0.25);
    }

    #[test]
    fn helpers_work_on_every_scalar() {
        fn check<T: Scalar>() {
            let a = T::ratio(1, 2);
            let b = T::ratio(3, 4);
            assert_eq!(a.max_of(b), b);
            assert_eq!(a.min_of(b), a);
            assert_eq!((a - b).abs_value(), T::ratio(1, 4));
        }
        check::<f32>();
        check::<f64>();
        check::<Exact>();
    }
}
