//! Seed generation: turns a decomposed input and a lookup table into the
//! fixed-point starting value for the iteration, folding the input exponent
//! into the seed.

use crate::fp::FpValue;
use crate::lut::{LookupTable, TableKind};
use crate::nr::FixedPoint;

/// floor(2^26 / sqrt(2)) = isqrt(2^51); multiplying by this and shifting
/// right 26 divides a Q26 mantissa by sqrt(2).
pub const RSQRT2_Q26: u64 = 47_453_132;

/// Fraction bits of the seed mantissa.
pub const SEED_FRACTION_BITS: u32 = 26;

/// Iteration starting value: mantissa in (0.25, 1] as Q26, plus a binary
/// exponent, so that seed = mantissa * 2^exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub mantissa: FixedPoint,
    pub exponent: i32,
}

impl Seed {
    pub fn to_f64(&self) -> f64 {
        self.mantissa.to_f64() * (self.exponent as f64).exp2()
    }
}

/// Folds the input exponent e into a Q26 mantissa estimate of rsqrt of the
/// input's mantissa: even e halves directly; odd e additionally divides the
/// mantissa by sqrt(2) and rounds the exponent up.
pub fn apply_exponent(m26: u64, e: i32) -> Seed {
    let (mantissa, exponent) = if e % 2 == 0 {
        (m26, -e / 2)
    } else {
        ((m26 * RSQRT2_Q26) >> 26, -(e - 1) / 2)
    };
    Seed {
        mantissa: FixedPoint {
            value: mantissa,
            fraction_bits: SEED_FRACTION_BITS,
        },
        exponent,
    }
}

fn seed_mantissa_mlt(table: &LookupTable, fraction: u32) -> u64 {
    let spec = table.spec;
    let addr = fraction >> (23 - spec.addr_bits);
    let f = spec.interp_factor;
    let word = if f == 1 {
        u64::from(table.stored_word(addr))
    } else {
        // Reduced table: the address collapses onto its kept word.
        u64::from(table.entries[(addr / f) as usize])
    };
    // An uncompressed word keeps its leading 1 as the MSB of the stored
    // width; left-align it into Q26.
    word << (26 - spec.word_bits)
}

fn seed_mantissa_alt(table: &LookupTable, fraction: u32) -> u64 {
    let spec = table.spec;
    let k_eff = spec.addr_bits - spec.interp_factor.trailing_zeros();
    let addr = fraction >> (23 - k_eff);
    let mask = (1u32 << (23 - k_eff)) - 1;
    let modified = (1u64 << 23) + u64::from(fraction ^ mask);
    let c = u64::from(table.entries[addr as usize]);
    // c is Q25 and the operand Q23; the product is Q48, so 22 shifts leave
    // Q26. Clamp the open upper end to 1.0.
    ((c * modified) >> 22).min(1 << 26)
}

/// Looks up the seed for a positive normal input. The result approximates
/// rsqrt(x) with mantissa in (0.25, 1].
pub fn seed(table: &LookupTable, x: FpValue) -> Seed {
    let m26 = match table.spec.kind {
        TableKind::Mlt => seed_mantissa_mlt(table, x.fraction),
        TableKind::Alt => seed_mantissa_alt(table, x.fraction),
    };
    apply_exponent(m26, x.exponent)
}
