//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the radial machinery is generic over.
///
/// Besides the usual `num_traits` surface, implementors expose the working
/// precision (used for convergence tests; `Float::epsilon` is not reliable for
/// every backend) and a cap on the natural-log exponent beyond which `exp`
/// is treated as saturated.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Relative working precision of the type.
    fn precision() -> Self;
    /// Largest exponent accepted by saturating exponentials.
    fn exp_cap() -> Self;
}

impl Real for f64 {
    fn precision() -> Self {
        f64::EPSILON
    }
    fn exp_cap() -> Self {
        700.0
    }
}

impl Real for f32 {
    fn precision() -> Self {
        f32::EPSILON
    }
    fn exp_cap() -> Self {
        80.0
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

/// Converts an integer into `T` exactly.
#[inline]
pub fn int<T: Real>(n: i64) -> T {
    T::from_i64(n).expect("integer literal")
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
