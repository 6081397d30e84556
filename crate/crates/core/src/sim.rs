//! Sampling harness: deterministic corpus generation, per-configuration
//! convergence statistics, parameter sweeps, and CSV/markdown rendering.

use crate::fp::decompose;
use crate::lut::{
    build_alt, build_mlt_words, compress_words, reduce, LookupTable, TableError, TableKind,
    TableSpec,
};
use crate::nr::{engine_operand, run_sample};
use crate::seed::seed;
use std::fmt;
use std::fmt::Write as _;

/// splitmix64 generator; tiny state, full 64-bit output, stable everywhere.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Deterministic set of positive normal single-precision inputs.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub prng_seed: u64,
    /// Bit patterns; always positive normals by construction.
    pub samples: Vec<u32>,
}

/// Draws `count` positive normals: 23 random fraction bits and an exponent
/// field uniform over the normal range [1, 254].
pub fn gen_corpus(prng_seed: u64, count: usize) -> Corpus {
    let mut rng = SplitMix64::new(prng_seed);
    let samples = (0..count)
        .map(|_| {
            let z = rng.next_u64();
            let fraction = (z & 0x7F_FFFF) as u32;
            let exp_field = 1 + ((z >> 23) % 254) as u32;
            (exp_field << 23) | fraction
        })
        .collect();
    Corpus { prng_seed, samples }
}

/// Statistics of one table configuration over one corpus.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub spec: TableSpec,
    pub samples: usize,
    pub prng_seed: u64,
    /// Working precision of the iteration.
    pub g: u32,
    /// Mean log2 relative error after one step, over converged samples with
    /// a nonzero error.
    pub avg_error_exp_iter1: f64,
    /// Same after two steps.
    pub avg_error_exp_iter2: f64,
    pub divergence_pct: f64,
    /// Mean steps to reach the target, over converged samples.
    pub avg_iterations: f64,
    /// True iff every converged sample is within one ulp after one step.
    pub acceptable_after_1: bool,
    /// True iff every converged sample is within one ulp after two steps.
    pub acceptable_after_2: bool,
    // Raw counts behind the aggregates, for finer-grained checks.
    pub converged: usize,
    pub diverged: usize,
    pub fail_after_1: usize,
    pub fail_after_2: usize,
    pub max_ulps_after_2: f64,
}

#[derive(Debug)]
pub enum SimError {
    NoRecords,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::NoRecords => f.write_str("no records to render"),
        }
    }
}

impl std::error::Error for SimError {}

/// Builds the table a spec describes: full build, then reduction, then
/// word compression as requested.
pub fn build_from_spec(spec: TableSpec) -> Result<LookupTable, TableError> {
    spec.validate()?;
    let full = match spec.kind {
        TableKind::Mlt => build_mlt_words(spec.addr_bits, spec.word_bits)?,
        TableKind::Alt => build_alt(spec.addr_bits)?,
    };
    let reduced = if spec.interp_factor > 1 {
        reduce(&full, spec.interp_factor)?
    } else {
        full
    };
    if spec.compressed {
        compress_words(&reduced)
    } else {
        Ok(reduced)
    }
}

/// Runs every corpus sample through seed and iteration, aggregating the
/// statistics. Diverged samples (step signal or no convergence within
/// max_iter) are excluded from every average; exact-hit errors (zero ulps)
/// are excluded from the error-exponent means.
pub fn evaluate_with_table(
    table: &LookupTable,
    corpus: &Corpus,
    g: u32,
    max_iter: u32,
) -> SweepRecord {
    let mut diverged = 0usize;
    let mut converged = 0usize;
    let mut iters_sum = 0u64;
    let mut fail1 = 0usize;
    let mut fail2 = 0usize;
    let mut e1_sum = 0.0f64;
    let mut e1_n = 0usize;
    let mut e2_sum = 0.0f64;
    let mut e2_n = 0usize;
    let mut max2 = 0.0f64;
    for &bits in &corpus.samples {
        let x = decompose(bits).expect("corpus samples are positive normals");
        let s = seed(table, x);
        let a = engine_operand(x, g);
        let r = run_sample(a, &s, x, max_iter, 1.0);
        let conv = match (r.trace.diverged, r.trace.iterations_to_converge) {
            (false, Some(n)) => n,
            _ => {
                diverged += 1;
                continue;
            }
        };
        converged += 1;
        iters_sum += u64::from(conv);
        if r.within_after_1() == Some(false) {
            fail1 += 1;
        }
        if r.within_after_2 == Some(false) {
            fail2 += 1;
        }
        if let Some(e) = r.err_after_1 {
            if e.is_finite() {
                e1_sum += e;
                e1_n += 1;
            }
        }
        if let Some(e) = r.err_after_2 {
            if e.is_finite() {
                e2_sum += e;
                e2_n += 1;
            }
        }
        if let Some(u) = r.ulps_after_2 {
            max2 = max2.max(u);
        }
    }
    let n = corpus.samples.len();
    let mean = |sum: f64, cnt: usize| if cnt > 0 { sum / cnt as f64 } else { f64::NAN };
    SweepRecord {
        spec: table.spec,
        samples: n,
        prng_seed: corpus.prng_seed,
        g,
        avg_error_exp_iter1: mean(e1_sum, e1_n),
        avg_error_exp_iter2: mean(e2_sum, e2_n),
        divergence_pct: if n > 0 {
            100.0 * diverged as f64 / n as f64
        } else {
            f64::NAN
        },
        avg_iterations: if converged > 0 {
            iters_sum as f64 / converged as f64
        } else {
            f64::NAN
        },
        acceptable_after_1: fail1 == 0,
        acceptable_after_2: fail2 == 0,
        converged,
        diverged,
        fail_after_1: fail1,
        fail_after_2: fail2,
        max_ulps_after_2: max2,
    }
}

/// Builds the configured table and evaluates it over the corpus.
pub fn evaluate_config(
    spec: TableSpec,
    corpus: &Corpus,
    g: u32,
    max_iter: u32,
) -> Result<SweepRecord, TableError> {
    let table = build_from_spec(spec)?;
    Ok(evaluate_with_table(&table, corpus, g, max_iter))
}

/// Cross-product evaluation over address widths and reduction factors,
/// ordered by (addr_bits, factor). Full tables are built once per width.
pub fn sweep(
    kind: TableKind,
    addr_bits: &[u32],
    factors: &[u32],
    corpus: &Corpus,
    g: u32,
    max_iter: u32,
) -> Result<Vec<SweepRecord>, TableError> {
    if addr_bits.is_empty() || factors.is_empty() {
        return Err(TableError::InvalidSpec(
            "sweep needs at least one address width and one factor".into(),
        ));
    }
    let mut ks: Vec<u32> = addr_bits.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut fs: Vec<u32> = factors.to_vec();
    fs.sort_unstable();
    fs.dedup();
    let mut out = Vec::with_capacity(ks.len() * fs.len());
    for &k in &ks {
        let full = match kind {
            TableKind::Mlt => build_mlt_words(k, 23)?,
            TableKind::Alt => build_alt(k)?,
        };
        for &f in &fs {
            let table = reduce(&full, f)?;
            out.push(evaluate_with_table(&table, corpus, g, max_iter));
        }
    }
    Ok(out)
}

/// Renders records as CSV: fixed header, one row per record, LF endings,
/// floats with four decimals.
pub fn render_csv(records: &[SweepRecord]) -> Result<String, SimError> {
    if records.is_empty() {
        return Err(SimError::NoRecords);
    }
    let mut out = String::from(
        "kind,addr_bits,word_bits,interp_factor,samples,prng_seed,g,\
         avg_error_exp_iter1,avg_error_exp_iter2,divergence_pct,avg_iterations,\
         acceptable_after_1,acceptable_after_2\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{},{}",
            r.spec.kind,
            r.spec.addr_bits,
            r.spec.word_bits,
            r.spec.interp_factor,
            r.samples,
            r.prng_seed,
            r.g,
            r.avg_error_exp_iter1,
            r.avg_error_exp_iter2,
            r.divergence_pct,
            r.avg_iterations,
            r.acceptable_after_1,
            r.acceptable_after_2,
        );
    }
    Ok(out)
}

/// Table layouts for the markdown report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportLayout {
    /// Columns per address width: divergence and average iterations.
    Table1,
    /// Columns per reduction factor: error acceptability after one and two
    /// steps, divergence, average iterations.
    Table2,
    /// Columns per reduction factor, one iteration row and one divergence
    /// row per (kind, width) group.
    Table3,
}

fn acceptability(flag: bool) -> &'static str {
    if flag {
        "Acceptable"
    } else {
        "Unacceptable"
    }
}

fn fmt_div(pct: f64) -> String {
    if pct == 0.0 {
        "None".to_string()
    } else {
        format!("{pct:.2}%")
    }
}

fn markdown_row(out: &mut String, label: &str, cells: &[String]) {
    let _ = write!(out, "| {label} |");
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out.push('\n');
}

fn markdown_rule(out: &mut String, cols: usize) {
    let _ = write!(out, "| --- |");
    for _ in 0..cols {
        let _ = write!(out, " --- |");
    }
    out.push('\n');
}

/// Renders records as a markdown table in one of the three report layouts.
pub fn render_markdown(records: &[SweepRecord], layout: ReportLayout) -> Result<String, SimError> {
    if records.is_empty() {
        return Err(SimError::NoRecords);
    }
    let mut out = String::new();
    match layout {
        ReportLayout::Table1 => {
            let heads: Vec<String> = records
                .iter()
                .map(|r| format!("{} bits", r.spec.addr_bits))
                .collect();
            markdown_row(&mut out, "Address width", &heads);
            markdown_rule(&mut out, records.len());
            markdown_row(
                &mut out,
                "Divergence",
                &records.iter().map(|r| fmt_div(r.divergence_pct)).collect::<Vec<_>>(),
            );
            markdown_row(
                &mut out,
                "Average iterations",
                &records
                    .iter()
                    .map(|r| format!("{:.2}", r.avg_iterations))
                    .collect::<Vec<_>>(),
            );
        }
        ReportLayout::Table2 => {
            let heads: Vec<String> = records
                .iter()
                .map(|r| r.spec.interp_factor.to_string())
                .collect();
            markdown_row(&mut out, "Reduction factor", &heads);
            markdown_rule(&mut out, records.len());
            markdown_row(
                &mut out,
                "Error after 1st iteration",
                &records
                    .iter()
                    .map(|r| acceptability(r.acceptable_after_1).to_string())
                    .collect::<Vec<_>>(),
            );
            markdown_row(
                &mut out,
                "Error after 2nd iteration",
                &records
                    .iter()
                    .map(|r| acceptability(r.acceptable_after_2).to_string())
                    .collect::<Vec<_>>(),
            );
            markdown_row(
                &mut out,
                "Divergence",
                &records.iter().map(|r| fmt_div(r.divergence_pct)).collect::<Vec<_>>(),
            );
            markdown_row(
                &mut out,
                "Average iterations",
                &records
                    .iter()
                    .map(|r| format!("{:.2}", r.avg_iterations))
                    .collect::<Vec<_>>(),
            );
        }
        ReportLayout::Table3 => {
            let mut factors: Vec<u32> = records.iter().map(|r| r.spec.interp_factor).collect();
            factors.sort_unstable();
            factors.dedup();
            let mut groups: Vec<(TableKind, u32)> = Vec::new();
            for r in records {
                let key = (r.spec.kind, r.spec.addr_bits);
                if !groups.contains(&key) {
                    groups.push(key);
                }
            }
            let heads: Vec<String> = factors.iter().map(|f| f.to_string()).collect();
            markdown_row(&mut out, "Reduction factor", &heads);
            markdown_rule(&mut out, factors.len());
            for (kind, k) in groups {
                let cell = |sel: &dyn Fn(&SweepRecord) -> String, f: u32| {
                    records
                        .iter()
                        .find(|r| {
                            r.spec.kind == kind
                                && r.spec.addr_bits == k
                                && r.spec.interp_factor == f
                        })
                        .map(|r| sel(r))
                        .unwrap_or_else(|| "-".to_string())
                };
                markdown_row(
                    &mut out,
                    &format!("Average iterations ({k}-bit {kind})"),
                    &factors
                        .iter()
                        .map(|&f| cell(&|r: &SweepRecord| format!("{:.2}", r.avg_iterations), f))
                        .collect::<Vec<_>>(),
                );
                markdown_row(
                    &mut out,
                    &format!("Divergence ({k}-bit {kind})"),
                    &factors
                        .iter()
                        .map(|&f| cell(&|r: &SweepRecord| fmt_div(r.divergence_pct), f))
                        .collect::<Vec<_>>(),
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: TableKind, k: u32, f: u32) -> TableSpec {
        TableSpec {
            kind,
            addr_bits: k,
            word_bits: match kind {
                TableKind::Mlt => 23,
                TableKind::Alt => 25,
            },
            interp_factor: f,
            compressed: false,
        }
    }

    #[test]
    fn golden_corpus_prefix() {
        let c = gen_corpus(42, 3);
        assert_eq!(c.samples, vec![0x736B_6E95, 0x39E6_F103, 0x6F8F_9F52]);
    }

    #[test]
    fn corpus_is_deterministic_and_normal() {
        let a = gen_corpus(7, 1000);
        let b = gen_corpus(7, 1000);
        assert_eq!(a.samples, b.samples);
        for &bits in &a.samples {
            let v = decompose(bits).unwrap();
            assert!((-126..=127).contains(&v.exponent));
        }
    }

    #[test]
    fn evaluate_full_alt_smoke() {
        let corpus = gen_corpus(42, 400);
        let r = evaluate_config(spec(TableKind::Alt, 12, 1), &corpus, 30, 4).unwrap();
        assert_eq!(r.converged + r.diverged, 400);
        assert_eq!(r.diverged, 0);
        assert!((r.avg_iterations - 1.0).abs() < 1e-9);
        assert!(r.acceptable_after_1);
        assert!(r.acceptable_after_2);
    }

    #[test]
    fn csv_is_byte_identical_across_runs() {
        let corpus = gen_corpus(42, 200);
        let one = sweep(TableKind::Mlt, &[11], &[1, 2], &corpus, 30, 4).unwrap();
        let two = sweep(TableKind::Mlt, &[11], &[1, 2], &corpus, 30, 4).unwrap();
        assert_eq!(render_csv(&one).unwrap(), render_csv(&two).unwrap());
    }

    #[test]
    fn csv_shape() {
        let corpus = gen_corpus(1, 50);
        let recs = sweep(TableKind::Alt, &[8, 6], &[2, 1], &corpus, 30, 4).unwrap();
        let csv = render_csv(&recs).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[0],
            "kind,addr_bits,word_bits,interp_factor,samples,prng_seed,g,\
             avg_error_exp_iter1,avg_error_exp_iter2,divergence_pct,avg_iterations,\
             acceptable_after_1,acceptable_after_2"
        );
        // Ordered by (addr_bits, factor) regardless of input order.
        assert!(lines[1].starts_with("alt,6,25,1,50,1,30,"));
        assert!(lines[2].starts_with("alt,6,25,2,50,1,30,"));
        assert!(lines[3].starts_with("alt,8,25,1,50,1,30,"));
        assert!(lines[4].starts_with("alt,8,25,2,50,1,30,"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn markdown_layouts() {
        let corpus = gen_corpus(42, 150);
        let recs = sweep(TableKind::Alt, &[10], &[2, 4], &corpus, 30, 4).unwrap();
        let t2 = render_markdown(&recs, ReportLayout::Table2).unwrap();
        assert!(t2.contains("Error after 1st iteration"));
        assert!(t2.contains("Acceptable"));
        let t1 = render_markdown(&recs, ReportLayout::Table1).unwrap();
        assert!(t1.contains("Average iterations"));
        let t3 = render_markdown(&recs, ReportLayout::Table3).unwrap();
        assert!(t3.contains("10-bit alt"));
    }

    #[test]
    fn empty_records_are_rejected() {
        assert!(matches!(render_csv(&[]), Err(SimError::NoRecords)));
        assert!(matches!(
            render_markdown(&[], ReportLayout::Table1),
            Err(SimError::NoRecords)
        ));
    }

    #[test]
    fn error_shrinks_with_wider_tables() {
        let corpus = gen_corpus(42, 400);
        let mut prev = f64::INFINITY;
        for k in [11u32, 12, 13] {
            let r = evaluate_config(spec(TableKind::Mlt, k, 2), &corpus, 30, 4).unwrap();
            assert!(
                r.avg_error_exp_iter1 <= prev + 0.05,
                "k={k} error {} vs previous {prev}",
                r.avg_error_exp_iter1
            );
            prev = r.avg_error_exp_iter1;
            // A second step always helps on average.
            assert!(r.avg_error_exp_iter2 <= r.avg_error_exp_iter1);
        }
    }

    #[test]
    fn compressed_spec_evaluates_like_plain() {
        let corpus = gen_corpus(5, 300);
        let plain = evaluate_config(spec(TableKind::Mlt, 11, 1), &corpus, 30, 4).unwrap();
        let mut cspec = spec(TableKind::Mlt, 11, 1);
        cspec.compressed = true;
        let packed = evaluate_config(cspec, &corpus, 30, 4).unwrap();
        assert_eq!(plain.avg_iterations, packed.avg_iterations);
        assert_eq!(plain.divergence_pct, packed.divergence_pct);
        assert_eq!(plain.avg_error_exp_iter1, packed.avg_error_exp_iter1);
    }
}
