//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar the geometry and estimation code is generic over.
///
/// Implemented for `f32` and `f64`. File formats store 32-bit floats, so
/// both instantiations read and write the same bytes.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn as_f32(self) -> f32 {
        ToPrimitive::to_f32(&self).unwrap_or(f32::NAN)
    }

    #[inline]
    fn from_count(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("count representable in scalar type")
    }

    /// Tolerance used for "exactly zero" geometric checks at this precision.
    #[inline]
    fn geom_eps() -> Self {
        Self::epsilon().sqrt()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut t = theta - two_pi * ((theta + T::PI()) / two_pi).floor();
    // floor puts us in [-pi, pi); fold the lower end onto +pi
    if t <= -T::PI() {
        t = t + two_pi;
    }
    if t > T::PI() {
        t = t - two_pi;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5f64) + 0.5).abs() < 1e-15);
        assert!((normalize_angle(2.0 * PI + 0.25f64) - 0.25).abs() < 1e-12);
        for k in -50..50 {
            let t = normalize_angle(k as f64 * 0.37);
            assert!(t > -PI && t <= PI);
        }
    }

    #[test]
    fn literal_roundtrip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(1e-9), 1e-9);
        assert_eq!(2.5f32.as_f64(), 2.5);
    }
}
