//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumAssign, Signed};

/// Real floating-point scalar (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + NumAssign + Signed + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `|x|^{1/2} sign(x)`: odd and continuous, 0 at 0.
#[inline]
pub fn signed_sqrt<T: Real>(x: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.abs().sqrt() * x.signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_sqrt_is_odd_and_continuous() {
        assert_eq!(signed_sqrt(0.0_f64), 0.0);
        assert_eq!(signed_sqrt(4.0_f64), 2.0);
        assert_eq!(signed_sqrt(-4.0_f64), -2.0);
        assert!(signed_sqrt(1e-300_f64).abs() < 1e-149);
    }

    #[test]
    fn literal_round_trip() {
        assert_eq!(f32::lit(0.5), 0.5_f32);
        assert_eq!(f64::lit(0.1).as_f64(), 0.1);
    }
}
