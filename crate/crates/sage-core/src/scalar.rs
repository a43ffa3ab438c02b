//! Scalar abstraction for all tensor math.
//!
//! Every numeric kernel in this crate is generic over [`Scalar`] so the same
//! code runs in `f32` or `f64`. The concrete aliases at the crate root pin
//! `f64`, which is what the verification suites use: finite-difference
//! checks at `1e-6` tolerances are not meaningful in single precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

/// Floating-point scalar usable as tensor element.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only if the type cannot represent
    /// any finite value, which none of the implementors do.
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to scalar")
    }

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar converts to f64")
    }

    /// One draw from the standard normal distribution.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the uniform distribution on `[0, 1)`.
    fn sample_unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($($t:ty)*) => {$(
        impl Scalar for $t {
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            fn sample_unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardUniform.sample(rng)
            }
        }
    )*};
}

impl_scalar!(f32 f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of_f64(1.5).as_f64(), 1.5);
        assert_eq!(f32::of_f64(0.25).as_f64(), 0.25);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..32 {
            let x: f64 = Scalar::sample_standard_normal(&mut a);
            let y: f64 = Scalar::sample_standard_normal(&mut b);
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
