//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All geometry and linear algebra is written against [`Real`], which is
//! implemented for `f32` and `f64`. Tolerances in this crate are stated for
//! `f64`; the `f32` instantiation is useful for smoke tests and quick
//! previews but will not meet the tighter residual checks.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point scalar usable by meshes, assemblies and solvers.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Short name used in reports.
    fn type_name() -> &'static str;

    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn type_name() -> &'static str {
        "f32"
    }

    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn type_name() -> &'static str {
        "f64"
    }

    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

/// Widens a scalar to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}
