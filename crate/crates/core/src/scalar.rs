//! Scalar abstraction for the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;

/// Floating point scalar usable by every kernel in this crate.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in the documentation
/// assume `f64`; at `f32` they degrade with the mantissa.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Draw a standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw a uniform variate in `[0, 1)`.
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f32, _>(rand_distr::StandardNormal)
    }

    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

impl Real for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    }

    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

/// Shorthand for converting an `f64` literal into the working scalar.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
