//! IEEE-754 single-precision decomposition, a high-precision integer
//! reciprocal-square-root oracle, and ULP-based error metrics.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;

/// Fraction width of the single-precision format.
pub const FRACTION_BITS: u32 = 23;
/// Smallest unbiased exponent of a normal number.
pub const EXP_MIN: i32 = -126;
/// Largest unbiased exponent of a normal number.
pub const EXP_MAX: i32 = 127;
/// Default oracle precision in bits.
pub const DEFAULT_ORACLE_BITS: u32 = 64;

/// A positive normal single-precision number, decomposed.
///
/// The sign is implicitly 0 and the leading mantissa bit is implicit 1:
/// the value is (1 + fraction * 2^-23) * 2^exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FpValue {
    /// Unbiased exponent in [-126, 127].
    pub exponent: i32,
    /// Fraction field in [0, 2^23).
    pub fraction: u32,
}

impl FpValue {
    /// The 24-bit significand 2^23 + fraction, in units of 2^-23.
    pub fn mantissa_units(&self) -> u64 {
        (1u64 << FRACTION_BITS) + self.fraction as u64
    }
}

/// Rejection classes for inputs outside the positive-normal domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpError {
    Zero,
    Subnormal,
    Negative,
    Infinity,
    Nan,
    ExponentRange,
}

impl fmt::Display for FpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self {
            FpError::Zero => "zero is outside the accepted domain",
            FpError::Subnormal => "subnormal numbers are outside the accepted domain",
            FpError::Negative => "negative numbers are outside the accepted domain",
            FpError::Infinity => "infinities are outside the accepted domain",
            FpError::Nan => "NaN is outside the accepted domain",
            FpError::ExponentRange => "exponent outside the normal range [-126, 127]",
        };
        f.write_str(what)
    }
}

impl std::error::Error for FpError {}

/// Splits a 32-bit pattern into exponent and fraction, rejecting anything
/// that is not a positive normal number.
pub fn decompose(bits: u32) -> Result<FpValue, FpError> {
    let sign = bits >> 31;
    let exp_field = (bits >> 23) & 0xFF;
    let fraction = bits & 0x7F_FFFF;
    if exp_field == 0xFF {
        return Err(if fraction != 0 { FpError::Nan } else { FpError::Infinity });
    }
    if exp_field == 0 {
        return Err(if fraction == 0 { FpError::Zero } else { FpError::Subnormal });
    }
    if sign == 1 {
        return Err(FpError::Negative);
    }
    Ok(FpValue {
        exponent: exp_field as i32 - 127,
        fraction,
    })
}

/// Inverse of [`decompose`] on the accepted domain.
pub fn compose(v: FpValue) -> Result<u32, FpError> {
    if v.exponent < EXP_MIN || v.exponent > EXP_MAX {
        return Err(FpError::ExponentRange);
    }
    Ok((((v.exponent + 127) as u32) << 23) | (v.fraction & 0x7F_FFFF))
}

/// An arbitrary-precision non-negative value `value * 2^-scale_bits`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactScaled {
    pub value: BigUint,
    pub scale_bits: i64,
}

impl ExactScaled {
    /// Unbiased binary exponent: the value lies in [2^e, 2^(e+1)).
    pub fn exponent(&self) -> i64 {
        self.value.bits() as i64 - 1 - self.scale_bits
    }

    pub fn to_f64(&self) -> f64 {
        big_to_f64(&self.value) * exp2i(-self.scale_bits)
    }
}

/// Reference reciprocal square root, computed purely with integer
/// arithmetic: one big-integer square root of a scaled division.
///
/// Writing x = M * 2^ep with M the 24-bit significand and ep = exponent - 23
/// (M doubled once if ep is odd, so ep becomes even), the result is
/// value = isqrt(2^(2p+24) div M) at scale p + 12 + ep/2. Relative error is
/// below 2^-(p-1). Powers of four come out exact.
pub fn ref_rsqrt(x: FpValue, precision_bits: u32) -> ExactScaled {
    assert!(precision_bits >= 48, "oracle needs at least 48 bits");
    let p = precision_bits as i64;
    let mut m = BigUint::from(x.mantissa_units());
    let mut ep = x.exponent as i64 - FRACTION_BITS as i64;
    if ep & 1 != 0 {
        m <<= 1;
        ep -= 1;
    }
    let num = BigUint::one() << (2 * precision_bits as u64 + 24);
    ExactScaled {
        value: (num / m).sqrt(),
        scale_bits: p + 12 + ep / 2,
    }
}

/// Error magnitude in units of one last-place bit of the reference result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlpError {
    pub ulps: f64,
}

/// Base-2 exponent of the error relative to the 23-bit mantissa:
/// log2(ulps) - 23. An exact result maps to negative infinity.
pub fn error_exponent(e: UlpError) -> f64 {
    if e.ulps == 0.0 {
        f64::NEG_INFINITY
    } else {
        e.ulps.log2() - 23.0
    }
}

/// Absolute difference |a*2^-sa - b*2^-sb| as (value, common scale).
fn scaled_diff(a: &BigUint, sa: i64, b: &BigUint, sb: i64) -> (BigUint, i64) {
    let s = sa.max(sb);
    let av = a << (s - sa) as u64;
    let bv = b << (s - sb) as u64;
    let d = if av >= bv { av - bv } else { bv - av };
    (d, s)
}

/// ULP error of an arbitrary scaled value against a reference.
///
/// One ulp is 2^(e_r - 23) where e_r is the reference's binary exponent.
/// The difference is formed exactly; only the final division is floating.
pub fn ulp_error_scaled(value: &BigUint, scale_bits: i64, reference: &ExactScaled) -> UlpError {
    let (d, s) = scaled_diff(value, scale_bits, &reference.value, reference.scale_bits);
    let shift = s + reference.exponent() - FRACTION_BITS as i64;
    UlpError {
        ulps: big_to_f64(&d) * exp2i(-shift),
    }
}

/// Exact test for "strictly less than `target` ulps" when the target is 1:
/// diff < 2^shift compared as integers, no rounding involved.
pub fn within_ulps_scaled(
    value: &BigUint,
    scale_bits: i64,
    reference: &ExactScaled,
    target_ulps: f64,
) -> bool {
    let (d, s) = scaled_diff(value, scale_bits, &reference.value, reference.scale_bits);
    let shift = s + reference.exponent() - FRACTION_BITS as i64;
    if target_ulps == 1.0 {
        if shift < 0 {
            return d.is_zero();
        }
        d < (BigUint::one() << shift as u64)
    } else {
        big_to_f64(&d) * exp2i(-shift) < target_ulps
    }
}

/// ULP error of one decomposed float against the true rsqrt of another.
pub fn ulp_error(approx: FpValue, x: FpValue) -> UlpError {
    let reference = ref_rsqrt(x, DEFAULT_ORACLE_BITS);
    let value = BigUint::from(approx.mantissa_units());
    let scale = FRACTION_BITS as i64 - approx.exponent as i64;
    ulp_error_scaled(&value, scale, &reference)
}

fn big_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

/// 2^n as f64 for possibly large |n|.
fn exp2i(n: i64) -> f64 {
    // f64::powi saturates cleanly for |n| beyond the exponent range.
    2f64.powi(n.clamp(-2000, 2000) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decompose_one() {
        assert_eq!(
            decompose(0x3F80_0000).unwrap(),
            FpValue { exponent: 0, fraction: 0 }
        );
    }

    #[test]
    fn decompose_four() {
        assert_eq!(
            decompose(0x4080_0000).unwrap(),
            FpValue { exponent: 2, fraction: 0 }
        );
    }

    #[test]
    fn decompose_rejections() {
        assert_eq!(decompose(0xBF80_0000), Err(FpError::Negative));
        assert_eq!(decompose(0x0000_0000), Err(FpError::Zero));
        assert_eq!(decompose(0x8000_0000), Err(FpError::Zero));
        assert_eq!(decompose(0x0000_0001), Err(FpError::Subnormal));
        assert_eq!(decompose(0x7F80_0000), Err(FpError::Infinity));
        assert_eq!(decompose(0x7FC0_0000), Err(FpError::Nan));
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose(FpValue { exponent: 0, fraction: 0 }).unwrap(), 0x3F80_0000);
        // 0.75 = 1.5 * 2^-1
        assert_eq!(
            compose(FpValue { exponent: -1, fraction: 1 << 22 }).unwrap(),
            0x3F40_0000
        );
        assert_eq!(
            compose(FpValue { exponent: 200, fraction: 0 }),
            Err(FpError::ExponentRange)
        );
    }

    proptest! {
        #[test]
        fn roundtrip_positive_normals(exp_field in 1u32..=254, fraction in 0u32..(1 << 23)) {
            let bits = (exp_field << 23) | fraction;
            let v = decompose(bits).unwrap();
            prop_assert_eq!(compose(v).unwrap(), bits);
        }
    }

    #[test]
    fn oracle_exact_on_four() {
        let r = ref_rsqrt(decompose(0x4080_0000).unwrap(), 64);
        // 0.5 exactly: a power of two at the stated scale.
        assert_eq!(r.value, BigUint::one() << 64);
        assert_eq!(r.scale_bits, 65);
        assert_eq!(r.to_f64(), 0.5);
    }

    #[test]
    fn oracle_exact_on_quarter() {
        let r = ref_rsqrt(decompose(0x3E80_0000).unwrap(), 64);
        assert_eq!(r.to_f64(), 2.0);
    }

    #[test]
    fn oracle_two_matches_forty_bits() {
        // 1/sqrt(2): check by squaring, 2*v^2 must match 2^(2s) to ~60 bits.
        let r = ref_rsqrt(decompose(0x4000_0000).unwrap(), 64);
        let two_v2 = 2u32 * (&r.value * &r.value);
        let target = BigUint::one() << (2 * r.scale_bits as u64);
        let d = if two_v2 >= target { &two_v2 - &target } else { &target - &two_v2 };
        assert!(d.bits() as i64 <= 2 * r.scale_bits - 60);
        assert!((r.to_f64() - 0.7071067811865476).abs() < 1e-13);
    }

    #[test]
    fn ulp_exact_and_one_off() {
        let four = decompose(0x4080_0000).unwrap();
        let half = FpValue { exponent: -1, fraction: 0 };
        assert_eq!(ulp_error(half, four).ulps, 0.0);
        let one_off = FpValue { exponent: -1, fraction: 1 };
        assert_eq!(ulp_error(one_off, four).ulps, 1.0);
    }

    #[test]
    fn ulp_of_crude_guess() {
        // approx 0.75 against rsqrt(2): |0.75 - 2^-0.5| / 2^(-1-23).
        let x = decompose(0x4000_0000).unwrap();
        let approx = decompose(0x3F40_0000).unwrap();
        let u = ulp_error(approx, x);
        assert!((u.ulps - 719_628.797).abs() < 0.05, "got {}", u.ulps);
        let ee = error_exponent(u);
        assert!((ee - (-3.543107)).abs() < 1e-4, "got {ee}");
    }

    #[test]
    fn error_exponent_convention() {
        assert_eq!(error_exponent(UlpError { ulps: 1.0 }), -23.0);
        assert_eq!(error_exponent(UlpError { ulps: (1u64 << 19) as f64 }), -4.0);
        assert_eq!(error_exponent(UlpError { ulps: 0.0 }), f64::NEG_INFINITY);
    }

    #[test]
    fn oracle_self_consistency_sample() {
        // |v^2 * x * 2^-2s - 1| < 2^-38, checked exactly on a small sample.
        let mut state = 7u64;
        for _ in 0..200 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let exp_field = 1 + ((state >> 40) % 254) as u32;
            let fraction = (state & 0x7F_FFFF) as u32;
            let x = decompose((exp_field << 23) | fraction).unwrap();
            let r = ref_rsqrt(x, 64);
            // v^2 * M * 2^(e-23) vs 2^(2s): compare v^2*M against 2^(2s-e+23).
            let lhs = &r.value * &r.value * BigUint::from(x.mantissa_units());
            let rhs_shift = 2 * r.scale_bits - x.exponent as i64 + 23;
            assert!(rhs_shift > 0);
            let rhs = BigUint::one() << rhs_shift as u64;
            let d = if lhs >= rhs { &lhs - &rhs } else { &rhs - &lhs };
            // d / rhs < 2^-38  <=>  d << 38 < rhs
            assert!((&d << 38u32) < rhs, "relative defect too large");
        }
    }

    #[test]
    fn oracle_exact_powers_of_four() {
        for k in -60i32..=60 {
            let e = 2 * k;
            if !(EXP_MIN..=EXP_MAX).contains(&e) {
                continue;
            }
            let x = FpValue { exponent: e, fraction: 0 };
            let r = ref_rsqrt(x, 64);
            // 1/sqrt(4^k) = 2^-k, so value = 2^(scale - k) exactly.
            assert_eq!(r.value, BigUint::one() << (r.scale_bits - k as i64) as u64);
            assert_eq!(ulp_error_scaled(&r.value, r.scale_bits, &r).ulps, 0.0);
        }
    }
}
