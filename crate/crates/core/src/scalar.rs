use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate (`f32` or `f64`).
///
/// Built on nalgebra's `RealField` so dense eigensolvers and LU solves are
/// available, plus num-traits conversions for constants and output.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `requested`, but never finer than what the type can resolve.
    ///
    /// For `f64` this is `requested` itself for anything above ~1e-14; for
    /// `f32` it floors at a few hundred ulps.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::default_epsilon().as_f64() * 64.0;
        Self::lit(requested.max(floor))
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
