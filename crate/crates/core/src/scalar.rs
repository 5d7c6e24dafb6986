//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

/// Real scalar used by the damage models, special functions and samplers.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are
/// floored at a small multiple of `epsilon()`, so `f32` instantiations run
/// with correspondingly looser accuracy.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self;

    /// Draws from the standard normal distribution.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draws uniformly from `[0, 1)`.
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts to `f64` (lossless for both implementations).
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count or index.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    /// Largest of `tol` and a small multiple of machine epsilon.
    fn floor_tol(tol: Self) -> Self {
        tol.max(Self::epsilon() * Self::lit(16.0))
    }
}

macro_rules! impl_real {
    ($($t:ty),*) => {$(
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardUniform.sample(rng)
            }
        }
    )*};
}

impl_real!(f32, f64);

/// Logistic function `1 / (1 + exp(-x))`, evaluated without overflow.
pub fn logistic<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Inverse of [`logistic`].
pub fn logit<F: Real>(p: F) -> F {
    (p / (F::one() - p)).ln()
}
