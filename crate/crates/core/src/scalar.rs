//! Scalar abstraction shared by the geometric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the geometry, candidate and metric code.
///
/// Implemented for `f32` and `f64`. The learner itself works in `f64`
/// only; geometry produced in another precision is widened on entry.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Widens to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// Tolerance below which a length or area counts as zero.
    fn degenerate_eps() -> Self;
}

impl Real for f32 {
    fn degenerate_eps() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn degenerate_eps() -> Self {
        1e-12
    }
}
