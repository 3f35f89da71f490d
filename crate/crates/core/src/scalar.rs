//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All signal-processing code is written against [`Real`], which is satisfied
//! by `f32` and `f64`. Complex samples are `num_complex::Complex<T>`.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use std::fmt::{Debug, Display, LowerExp};

/// Floating-point scalar usable by the simulation kernels: f32 or f64.
pub trait Real:
    Float + FloatConst + FftNum + FromPrimitive + ToPrimitive + Default + Display + LowerExp + Debug
{
    /// Lossy conversion from `f64`, used for literals and configuration values.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a sample or bin count.
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Absolute tolerance for "this entry should be structurally zero" checks.
    ///
    /// 1e-10 in double precision, a few thousand ulps in single precision.
    fn structural_tol() -> Self {
        let eps_based = Self::epsilon() * Self::lit(1e4);
        if eps_based > Self::lit(1e-10) {
            eps_based
        } else {
            Self::lit(1e-10)
        }
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FftNum + FromPrimitive + ToPrimitive + Default + Display + LowerExp + Debug
{
}

/// Complex sample with scalar `T`.
pub type C<T> = Complex<T>;

/// `exp(j * theta)`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(Float::cos(theta), Float::sin(theta))
}

/// `exp(j 2 pi num / den)` evaluated with the integer phase reduced modulo `den`
/// first, so large exponents keep full precision.
#[inline]
pub fn root_of_unity<T: Real>(num: i64, den: usize) -> Complex<T> {
    let den_i = den as i64;
    let r = num.rem_euclid(den_i);
    cis(T::TAU() * T::lit(r as f64) / T::from_usize_lossy(den))
}

/// Largest entrywise modulus of `a - b`; slices must have equal length.
pub fn max_abs_diff<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    assert_eq!(a.len(), b.len(), "max_abs_diff on slices of unequal length");
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(T::zero(), Float::max)
}

/// Non-negative remainder of `a` modulo `m`.
#[inline]
pub fn wrap(a: i64, m: usize) -> usize {
    a.rem_euclid(m as i64) as usize
}
