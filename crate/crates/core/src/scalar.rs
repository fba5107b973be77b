//! Scalar abstraction shared by the numerical modules.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Everything that needs transcendental functions, linear algebra or
/// complex arithmetic is written against this trait.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn finite(self) -> bool {
        self.to_f64().map(f64::is_finite).unwrap_or(false)
    }

    /// Unit roundoff of the type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Ordered field with exact small-integer constants.
///
/// Implemented by `f32`, `f64` and exact rationals such as
/// `num_rational::Ratio<i64>`, so that the piecewise closed-form rates can
/// be evaluated without rounding.
pub trait Field:
    num_traits::Num + PartialOrd + Clone + FromPrimitive + std::fmt::Debug
{
    #[inline]
    fn int(n: i32) -> Self {
        Self::from_i32(n).expect("small integer representable")
    }

    #[inline]
    fn ratio(num: i32, den: i32) -> Self {
        Self::int(num) / Self::int(den)
    }
}

impl<T> Field for T where T: num_traits::Num + PartialOrd + Clone + FromPrimitive + std::fmt::Debug {}
