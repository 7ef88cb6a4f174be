//! Scalar abstraction shared by the numeric cores.
//!
//! Vector fields, the flux integrals, the transition detector and both
//! networks are written against [`Scalar`] so the same code runs at 32-bit
//! (storage, training) and 64-bit (reference checks) precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; always succeeds for finite inputs.
    fn of(v: f64) -> Self;

    /// Widening conversion to `f64`.
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

/// Element-wise precision cast between scalar buffers.
pub fn cast_slice<A: Scalar, B: Scalar>(src: &[A]) -> Vec<B> {
    src.iter().map(|&v| B::of(v.f64())).collect()
}

/// Ordered additive type: enough structure for prefix sums and argmax.
/// Implemented by the floats and by exact rationals.
pub trait Additive:
    Copy + num_traits::Zero + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + PartialOrd
{
}

impl<T> Additive for T where
    T: Copy + num_traits::Zero + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + PartialOrd
{
}
