//! Scalar traits shared by the float-valued stages (stimulus, decode, eval)
//! and the integer-valued neuron fabric.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, PrimInt, Signed, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type used for geometry, ground truth and flow values.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Serialize + DeserializeOwned + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literal constants.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits the scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Signed integer membrane potential. At least 32 bits wide so that
/// refractory resets of `-(2^14 - 1)` plus a tick of input never overflow.
pub trait Potential:
    PrimInt + Signed + Debug + Display + Default + std::hash::Hash + Serialize + DeserializeOwned + Send + Sync + 'static
 {
    fn from_i64(v: i64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("value fits the potential type")
    }
}

impl Potential for i32 {}
impl Potential for i64 {}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<F: Real>(a: F) -> F {
    let two_pi = F::TAU();
    let mut r = a % two_pi;
    if r < F::zero() {
        r = r + two_pi;
    }
    if r >= two_pi {
        r = r - two_pi;
    }
    r
}

/// Wrapped difference `a - b` in `(-π, π]`.
pub fn angle_diff<F: Real>(a: F, b: F) -> F {
    let d = wrap_angle(a - b);
    if d > F::PI() {
        d - F::TAU()
    } else {
        d
    }
}
