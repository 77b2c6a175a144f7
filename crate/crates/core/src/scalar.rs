use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rustfft::FftNum;

/// Real scalar the engine computes in.
///
/// Accumulation inside dot products is always carried out in `f64`, whatever
/// the storage type.
pub trait Scalar:
    Float + FftNum + FromPrimitive + Default + Sum + Display + Debug + Send + Sync + 'static
{
    fn to_acc(self) -> f64;
    fn from_acc(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline(always)]
    fn to_acc(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn from_acc(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn to_acc(self) -> f64 {
        self
    }
    #[inline(always)]
    fn from_acc(v: f64) -> Self {
        v
    }
}
