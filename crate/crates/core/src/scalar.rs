//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for circle coordinates, densities and exponents.
///
/// Implemented for `f32` and `f64`. The associated tolerances scale with the
/// precision of the type, so the same algorithms run in either width.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance (in circle units) for bracketed root refinement.
    fn root_tol() -> Self;

    /// Arcs and gaps shorter than this are dropped during normalization.
    fn min_arc() -> Self;

    /// Floor applied to `|τ'|` before taking logarithms.
    fn log_floor() -> Self;

    /// Converts an `f64` literal. Panics only on non-representable input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// `2π`.
    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f64 {
    #[inline]
    fn root_tol() -> Self {
        1e-12
    }
    #[inline]
    fn min_arc() -> Self {
        1e-14
    }
    #[inline]
    fn log_floor() -> Self {
        1e-300
    }
}

impl Scalar for f32 {
    #[inline]
    fn root_tol() -> Self {
        1e-6
    }
    #[inline]
    fn min_arc() -> Self {
        1e-6
    }
    #[inline]
    fn log_floor() -> Self {
        f32::MIN_POSITIVE
    }
}

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap<T: Scalar>(x: T) -> T {
    let r = x - x.floor();
    // x = -tiny rounds to exactly 1
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Shortest distance between two points of the circle.
#[inline]
pub fn circle_dist<T: Scalar>(x: T, y: T) -> T {
    let d = wrap(x - y);
    d.min(T::one() - d)
}

/// Compensated (Neumaier) running sum, accumulated in `f64` whatever the
/// scalar width.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add<T: Scalar>(&mut self, v: T) {
        let v = v.as_f64();
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value<T: Scalar>(&self) -> T {
        T::lit(self.sum + self.comp)
    }
}
