//! Floating-point scalar abstraction shared by the RF and envelope math.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real scalar usable for power levels, gains and sample values: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Significant decimal digits needed for a lossless text round trip.
    const ROUND_TRIP_DIGITS: usize;

    /// Draw one standard-normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` literal. Every finite `f64` maps to some value of the target type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Format `v` in scientific notation with enough digits to parse back bit-exactly.
pub fn format_round_trip<S: Scalar>(v: S) -> String {
    format!("{:.*e}", S::ROUND_TRIP_DIGITS - 1, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_formatting_is_exact() {
        for v in [0.1f64, -42.596373105057564, 1e-18, 123456789.123, -0.0] {
            let s = format_round_trip(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        for v in [0.1f32, -42.59637f32, 3.3e-9f32] {
            let s = format_round_trip(v);
            assert_eq!(s.parse::<f32>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn round_trip_format_has_at_least_nine_significant_digits() {
        let s = format_round_trip(-40.0f64);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        assert!(mantissa.chars().filter(|c| c.is_ascii_digit()).count() >= 9, "{s}");
        let s = format_round_trip(-40.0f32);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 9, "{s}");
    }
}
