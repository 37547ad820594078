//! Scalar abstractions shared by the generic numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, One, Zero};

/// Real floating point type: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Lossy conversion from an index or count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Field element usable in the direct solvers: a real scalar or a complex
/// number over one.
pub trait Field:
    Copy + NumAssign + Neg<Output = Self> + Zero + One + Debug + Send + Sync + 'static
{
    type Real: Scalar;

    /// Absolute value (modulus for complex numbers).
    fn modulus(self) -> Self::Real;
}

impl Field for f32 {
    type Real = f32;
    #[inline]
    fn modulus(self) -> f32 {
        self.abs()
    }
}

impl Field for f64 {
    type Real = f64;
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl<T: Scalar> Field for Complex<T> {
    type Real = T;
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
}
