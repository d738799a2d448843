//! Floating-point abstraction shared by the moment calculus, the bounds and
//! the Fock-space oracle.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Absolute tolerance for double-precision comparisons.
pub const ABS_TOL: f64 = 1e-12;
/// Relative tolerance for double-precision comparisons.
pub const REL_TOL: f64 = 1e-9;

/// Real scalar type the library computes in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Absolute tolerance appropriate for this precision.
    const ABS_TOL: f64;
    /// Relative tolerance appropriate for this precision.
    const REL_TOL: f64;

    /// Converts an `f64` literal. Every `f64` is representable (possibly
    /// rounded) in every implementor, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn abs_tol() -> Self {
        Self::lit(Self::ABS_TOL)
    }

    #[inline]
    fn rel_tol() -> Self {
        Self::lit(Self::REL_TOL)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const ABS_TOL: f64 = ABS_TOL;
    const REL_TOL: f64 = REL_TOL;
}

impl Scalar for f32 {
    const ABS_TOL: f64 = 1e-5;
    const REL_TOL: f64 = 1e-4;
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x % two_pi;
    if y < T::zero() {
        y += two_pi;
    }
    // `x % 2π` may round up to exactly 2π for tiny negative inputs.
    if y >= two_pi {
        y -= two_pi;
    }
    y
}

/// Relative deviation `|a − b| / max(|b|, floor)`.
pub fn rel_dev<T: Scalar>(a: T, b: T, floor: T) -> T {
    (a - b).abs() / b.abs().max(floor)
}
