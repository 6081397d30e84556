//! Fixed-point Newton-Raphson iteration for the reciprocal square root,
//! with exact-arithmetic convergence tracking.

use crate::fp::{
    error_exponent, ref_rsqrt, ulp_error_scaled, within_ulps_scaled, ExactScaled, FpValue,
    UlpError,
};
use crate::seed::Seed;
use num_bigint::BigUint;

/// Minimum supported working precision.
pub const G_MIN: u32 = 24;
/// Maximum supported working precision.
pub const G_MAX: u32 = 60;
/// Default working precision of the iteration.
pub const DEFAULT_G: u32 = 30;

/// Unsigned fixed-point number with an explicit binary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPoint {
    pub value: u64,
    pub fraction_bits: u32,
}

impl FixedPoint {
    pub fn to_f64(&self) -> f64 {
        self.value as f64 / (self.fraction_bits as f64).exp2()
    }
}

/// Builds the iteration operand a = M * 2^(g-23) or M * 2^(g-22) from the
/// input mantissa, so that a equals x scaled into [1,2) or [2,4) in Qg
/// depending on the parity of the input exponent. The iteration then refines
/// y ~ rsqrt(a), and the seed's folded exponent accounts for the rest.
pub fn engine_operand(x: FpValue, g: u32) -> FixedPoint {
    assert!((G_MIN..=G_MAX).contains(&g), "precision g out of range");
    let m = (1u64 << 23) | u64::from(x.fraction);
    let shift = if x.exponent % 2 == 0 { g - 23 } else { g - 22 };
    FixedPoint {
        value: m << shift,
        fraction_bits: g,
    }
}

/// One iteration step y' = y*(3 - a*y^2)/2 in Qg arithmetic with truncating
/// right shifts. Returns None when the quadratic term reaches 3, which only
/// happens for a seed far above the root (divergence signal).
pub fn nr_step(a: FixedPoint, y: FixedPoint) -> Option<FixedPoint> {
    let g = a.fraction_bits;
    assert_eq!(g, y.fraction_bits, "operand and iterate must share g");
    let s = ((y.value as u128 * y.value as u128) >> g) as u64;
    let p = ((a.value as u128 * s as u128) >> g) as u64;
    let three = 3u64 << g;
    if p >= three {
        return None;
    }
    let q = three - p;
    let r = ((y.value as u128 * q as u128) >> g) as u64;
    Some(FixedPoint {
        value: r >> 1,
        fraction_bits: g,
    })
}

/// Converts the seed mantissa into the iteration's working precision.
pub fn seed_iterate(seed: &Seed, g: u32) -> FixedPoint {
    let sb = seed.mantissa.fraction_bits;
    let value = if g >= sb {
        seed.mantissa.value << (g - sb)
    } else {
        seed.mantissa.value >> (sb - g)
    };
    FixedPoint {
        value,
        fraction_bits: g,
    }
}

/// Record of one iteration run.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// log2 of the relative error of the iterate after each completed step,
    /// up to and including the converging step.
    pub error_exponents: Vec<f64>,
    /// Error in reference ulps after each completed step, parallel to
    /// `error_exponents`.
    pub ulps: Vec<f64>,
    /// First step after which the iterate is within the target of the
    /// reference, if any.
    pub iterations_to_converge: Option<u32>,
    /// True when a step signalled divergence before convergence.
    pub diverged: bool,
    /// Distance of the last iterate (or the seed, if no step ran) from the
    /// reference, in units in the last place of the reference.
    pub final_ulp: f64,
}

/// Exact reference for the iterate's target: rsqrt of the engine operand's
/// mantissa value, on the same scale the iterate lives on.
fn reference_for(x: FpValue, seed_exponent: i32) -> ExactScaled {
    // The iterate approximates rsqrt(x) / 2^seed_exponent; fold that shift
    // into the reference scale so comparisons stay exact.
    let r = ref_rsqrt(x, crate::fp::DEFAULT_ORACLE_BITS);
    ExactScaled {
        value: r.value,
        scale_bits: r.scale_bits + i64::from(seed_exponent),
    }
}

fn iterate_ulp(y: FixedPoint, reference: &ExactScaled) -> UlpError {
    ulp_error_scaled(
        &BigUint::from(y.value),
        y.fraction_bits as i64,
        reference,
    )
}

/// Runs the iteration from a seed, tracking exact errors against the
/// reference. The trace stops at the converging step; later steps are not
/// taken. Divergence is recorded when a step signals it or when max_iter
/// steps never reach the target.
pub fn iterate(
    a: FixedPoint,
    seed: &Seed,
    x: FpValue,
    max_iter: u32,
    target_ulps: f64,
) -> IterationTrace {
    let g = a.fraction_bits;
    let reference = reference_for(x, seed.exponent);
    let mut y = seed_iterate(seed, g);
    let mut trace = IterationTrace {
        error_exponents: Vec::new(),
        ulps: Vec::new(),
        iterations_to_converge: None,
        diverged: false,
        final_ulp: iterate_ulp(y, &reference).ulps,
    };
    for it in 1..=max_iter {
        match nr_step(a, y) {
            None => {
                trace.diverged = true;
                return trace;
            }
            Some(next) => {
                y = next;
                let err = iterate_ulp(y, &reference);
                trace.final_ulp = err.ulps;
                trace.ulps.push(err.ulps);
                trace.error_exponents.push(error_exponent(err));
                if trace.iterations_to_converge.is_none()
                    && within_ulps_scaled(
                        &BigUint::from(y.value),
                        g as i64,
                        &reference,
                        target_ulps,
                    )
                {
                    trace.iterations_to_converge = Some(it);
                    return trace;
                }
            }
        }
    }
    if trace.iterations_to_converge.is_none() {
        trace.diverged = true;
    }
    trace
}

/// Trace plus the bookkeeping the statistics need: the error after step 1
/// and after step 2, where a sample that converged at step 1 gets one extra
/// off-trace step to measure its step-2 error.
#[derive(Debug, Clone)]
pub struct SampleRun {
    pub trace: IterationTrace,
    pub err_after_1: Option<f64>,
    pub err_after_2: Option<f64>,
    /// Exact (integer-compared) "within one reference ulp after two steps".
    pub within_after_2: Option<bool>,
    pub ulps_after_2: Option<f64>,
}

impl SampleRun {
    /// Exact "within one reference ulp after one step": the first step is
    /// the converging one.
    pub fn within_after_1(&self) -> Option<bool> {
        if self.trace.error_exponents.is_empty() {
            None
        } else {
            Some(self.trace.iterations_to_converge == Some(1))
        }
    }
}

/// Runs a sample and fills in the after-1/after-2 errors. The extra
/// bookkeeping step for early converters cannot re-mark the sample as
/// diverged: past convergence the iterate sits at the root, where the step
/// signal is unreachable. With max_iter = 1 no step-2 numbers exist.
pub fn run_sample(
    a: FixedPoint,
    seed: &Seed,
    x: FpValue,
    max_iter: u32,
    target_ulps: f64,
) -> SampleRun {
    let trace = iterate(a, seed, x, max_iter, target_ulps);
    let err_after_1 = trace.error_exponents.first().copied();
    let mut err_after_2 = trace.error_exponents.get(1).copied();
    let mut ulps_after_2 = trace.ulps.get(1).copied();
    // Steps past the first within-target one are exactly the non-within
    // ones, except for the off-trace bookkeeping step handled below.
    let mut within_after_2 = match trace.iterations_to_converge {
        Some(2) => Some(true),
        Some(n) if n > 2 => Some(false),
        _ => None,
    };
    if !trace.diverged && trace.iterations_to_converge == Some(1) && max_iter >= 2 {
        let reference = reference_for(x, seed.exponent);
        let g = a.fraction_bits;
        let y0 = seed_iterate(seed, g);
        if let Some(y1) = nr_step(a, y0) {
            if let Some(y2) = nr_step(a, y1) {
                let err = iterate_ulp(y2, &reference);
                err_after_2 = Some(error_exponent(err));
                ulps_after_2 = Some(err.ulps);
                within_after_2 = Some(within_ulps_scaled(
                    &BigUint::from(y2.value),
                    g as i64,
                    &reference,
                    target_ulps,
                ));
            }
        }
    }
    SampleRun {
        trace,
        err_after_1,
        err_after_2,
        within_after_2,
        ulps_after_2,
    }
}
