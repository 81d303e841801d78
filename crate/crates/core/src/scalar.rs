//! Scalar abstraction for the numeric core.
//!
//! The geometry and scoring math is generic over [`Real`] so the same
//! formulas run in `f32` or `f64`; the pipeline layers (selection, state
//! files, simulation) fix `f64` through the default type parameters and the
//! aliases at the crate root.

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Conversion from an `f64` constant (lossy for `f32`).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable")
    }

    /// Conversion from an unsigned count.
    #[inline]
    fn of_count(n: u64) -> Self {
        Self::of(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}
