//! Scalar abstraction for the numeric kernels.
//!
//! Estimators, clipping, scoring and bound computations are written against
//! [`Scalar`] so they run in `f32` or `f64`. Learners and the simulator work
//! in `f64` and convert at the boundary.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point type usable by the generic kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance used when checking that a probability row sums to one.
    fn row_sum_tolerance() -> Self;

    #[inline]
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("usize is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn row_sum_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn row_sum_tolerance() -> Self {
        1e-9
    }
}

/// Convert a slice of `f64` into any scalar.
pub fn cast_slice<T: Scalar>(values: &[f64]) -> Vec<T> {
    values.iter().map(|&v| T::of(v)).collect()
}
