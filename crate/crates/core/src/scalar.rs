//! Scalar abstraction for the geometric kernels: f32 or f64.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the distance and overlap kernels are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Debug + Display + Default + Send + Sync + 'static
{
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable as scalar")
    }

    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 representable as scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
