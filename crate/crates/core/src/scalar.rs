//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point: f32 or f64.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tolerance under which two fuzzy supports are considered equal.
    fn support_tolerance() -> Self;

    /// Overshoot outside the unit interval that degree construction silently clamps.
    fn clamp_slack() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn support_tolerance() -> Self {
        1e-12
    }
    fn clamp_slack() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn support_tolerance() -> Self {
        1e-6
    }
    fn clamp_slack() -> Self {
        1e-6
    }
}
