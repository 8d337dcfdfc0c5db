//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the steppers and the multigrid machinery.
///
/// Implemented for `f32` and `f64`. The bounds are what the parallel sweeps
/// need (`Send + Sync`) plus conversions used for diagnostics and output.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Send + Sync + Debug + Display + LowerExp + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Send + Sync + Debug + Display + LowerExp + 'static
{
}
