//! Reciprocal square roots for IEEE-754 single precision via table-seeded
//! Newton-Raphson iteration, with tools to study how lookup-table size
//! reduction (keeping every F-th word, trimming predictable leading bits)
//! trades table area against iteration count.
//!
//! - [`fp`]: float decomposition, an exact integer reference, ulp metrics.
//! - [`lut`]: table construction, reduction, compression, file format.
//! - [`seed`]: table lookup to fixed-point starting value.
//! - [`nr`]: the fixed-point iteration and convergence traces.
//! - [`sim`]: corpora, per-configuration statistics, sweeps, reports.

pub mod fp;
pub mod lut;
pub mod nr;
pub mod seed;
pub mod sim;
