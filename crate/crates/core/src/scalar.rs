//! Scalar abstractions.
//!
//! Floating-point code is generic over [`Real`] (`f32` or `f64`); the complex
//! amplitudes are always `Complex<T>` for the same `T`. Exact evaluations on
//! real-valued kernels (the Walsh grid) are generic over [`Field`], which also
//! admits `num_rational::Ratio<i64>`.

use std::fmt::Debug;

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::Num;

/// Floating-point scalar used by the complex linear algebra.
pub trait Real: RealField + Copy + Default + Into<f64> {
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Converts a count into this scalar.
    #[inline]
    fn from_count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    /// Scales an `f64` tolerance to this precision: tolerances tighter than a
    /// few hundred ulps are widened so that `f32` instances stay meaningful.
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = 256.0 * Self::default_epsilon().into();
        Self::lit(x.max(floor))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field used for exact (e.g. rational) evaluations.
pub trait Field: Num + Clone + PartialOrd + Debug {}

impl<T: Num + Clone + PartialOrd + Debug> Field for T {}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
