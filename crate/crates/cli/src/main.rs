//! Command-line harness: table generation, single-value evaluation,
//! configuration sweeps, leading-bit verification, and report rendering.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rsqrt_core::fp::{decompose, FpValue};
use rsqrt_core::lut::{
    build_mlt, compute_thresholds, export_csv, read_table, write_table, LookupTable, TableError,
    TableKind, TableSpec,
};
use rsqrt_core::nr::{engine_operand, iterate};
use rsqrt_core::seed::seed;
use rsqrt_core::sim::{
    build_from_spec, gen_corpus, render_csv, render_markdown, sweep, ReportLayout, SimError,
    SweepRecord,
};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rsqrt-lut",
    version,
    about = "Reciprocal square roots from lookup-table seeds: generate tables, \
             evaluate inputs, sweep configurations, render reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a lookup table and write it out
    Gen(GenArgs),
    /// Run the iteration for one input and print the trace
    Eval(EvalArgs),
    /// Evaluate a cross product of configurations and emit CSV
    Sweep(SweepArgs),
    /// Compute the predictable-leading-bit thresholds of full main tables
    VerifyBits(VerifyBitsArgs),
    /// Render a sweep CSV as a markdown table
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// Main table: direct mantissa words
    Mlt,
    /// Auxiliary table: per-segment coefficients
    Alt,
}

impl From<KindArg> for TableKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Mlt => TableKind::Mlt,
            KindArg::Alt => TableKind::Alt,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// Binary table file
    Bin,
    /// Human-readable address/value dump
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    /// Divergence and iterations per address width
    Table1,
    /// Acceptability, divergence, iterations per reduction factor
    Table2,
    /// Iterations and divergence rows per table, columns per factor
    Table3,
}

impl From<LayoutArg> for ReportLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Table1 => ReportLayout::Table1,
            LayoutArg::Table2 => ReportLayout::Table2,
            LayoutArg::Table3 => ReportLayout::Table3,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Table kind
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Address width in bits
    #[arg(long)]
    addr_bits: u32,
    /// Word width in bits (default: 23 for mlt, 25 for alt)
    #[arg(long)]
    word_bits: Option<u32>,
    /// Size-reduction factor, a power of two up to 64
    #[arg(long, default_value_t = 1)]
    interp: u32,
    /// Strip the three predictable leading bits (full 23-bit mlt only)
    #[arg(long)]
    compress: bool,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Bin)]
    format: FormatArg,
    /// Output path (standard output when omitted)
    #[arg(long)]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Input value: decimal float or 0x-prefixed IEEE-754 bit pattern
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Read the seed table from a file instead of building one
    #[arg(long)]
    table_file: Option<PathBuf>,
    /// Table kind (when building the table here)
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Address width in bits (when building the table here)
    #[arg(long)]
    addr_bits: Option<u32>,
    /// Word width in bits (default: 23 for mlt, 25 for alt)
    #[arg(long)]
    word_bits: Option<u32>,
    /// Size-reduction factor, a power of two up to 64
    #[arg(long, default_value_t = 1)]
    interp: u32,
    /// Strip the three predictable leading bits (full 23-bit mlt only)
    #[arg(long)]
    compress: bool,
    /// Working precision of the iteration in fraction bits
    #[arg(long, default_value_t = 30)]
    g: u32,
    /// Maximum iteration count
    #[arg(long, default_value_t = 4)]
    max_iter: u32,
}

#[derive(Args)]
struct SweepArgs {
    /// Table kind
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Address widths, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    addr_bits: Vec<u32>,
    /// Size-reduction factors, comma-separated powers of two
    #[arg(long, value_delimiter = ',', default_value = "1")]
    interp: Vec<u32>,
    /// Corpus size
    #[arg(long, default_value_t = 10000)]
    samples: usize,
    /// Corpus generator seed
    #[arg(long, default_value_t = 42)]
    prng_seed: u64,
    /// Working precision of the iteration in fraction bits
    #[arg(long, default_value_t = 30)]
    g: u32,
    /// Maximum iteration count
    #[arg(long, default_value_t = 4)]
    max_iter: u32,
    /// Output path (standard output when omitted)
    #[arg(long)]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyBitsArgs {
    /// Address widths of the full main tables to scan, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "11,12")]
    addr_bits: Vec<u32>,
    /// Scan a table file instead of building tables
    #[arg(long, conflicts_with = "addr_bits")]
    table_file: Option<PathBuf>,
    /// Expected second-bit thresholds, one per scanned table
    #[arg(long, value_delimiter = ',')]
    expect_t2: Vec<u32>,
    /// Expected third-bit thresholds, one per scanned table
    #[arg(long, value_delimiter = ',')]
    expect_t3: Vec<u32>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSV to read
    #[arg(long)]
    csv: PathBuf,
    /// Report layout
    #[arg(long, value_enum, default_value_t = LayoutArg::Table2)]
    layout: LayoutArg,
    /// Output path (standard output when omitted)
    #[arg(long)]
    out_file: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Domain(String),
    File(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Domain(_) => 1,
            CliError::File(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Domain(s) | CliError::File(s) => f.write_str(s),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Io(_) | TableError::Format(_) => CliError::File(e.to_string()),
            TableError::InvalidSpec(_) | TableError::Structure(_) => {
                CliError::Domain(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::File(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::VerifyBits(a) => cmd_verify_bits(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn make_spec(
    kind: KindArg,
    addr_bits: u32,
    word_bits: Option<u32>,
    interp: u32,
    compress: bool,
) -> TableSpec {
    let kind = TableKind::from(kind);
    TableSpec {
        kind,
        addr_bits,
        word_bits: word_bits.unwrap_or(match kind {
            TableKind::Mlt => 23,
            TableKind::Alt => 25,
        }),
        interp_factor: interp,
        compressed: compress,
    }
}

fn write_text(out_file: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out_file {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<(), CliError> {
    let spec = make_spec(a.kind, a.addr_bits, a.word_bits, a.interp, a.compress);
    let table = build_from_spec(spec)?;
    match a.format {
        FormatArg::Bin => {
            let mut buf = Vec::new();
            write_table(&table, &mut buf)?;
            match &a.out_file {
                Some(p) => fs::write(p, &buf)?,
                None => {
                    use std::io::Write as _;
                    std::io::stdout().write_all(&buf)?;
                }
            }
        }
        FormatArg::Csv => {
            let mut buf = Vec::new();
            export_csv(&table, &mut buf)?;
            let text = String::from_utf8(buf).expect("csv dump is utf-8");
            write_text(a.out_file.as_deref(), &text)?;
        }
    }
    if let Some(p) = &a.out_file {
        eprintln!(
            "wrote {} {}-bit table, {} words, to {}",
            table.spec.kind,
            table.spec.addr_bits,
            table.entries.len(),
            p.display()
        );
    }
    Ok(())
}

fn parse_input(s: &str) -> Result<FpValue, CliError> {
    let bits = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16)
            .map_err(|e| CliError::Usage(format!("bad bit pattern {s}: {e}")))?
    } else {
        let v: f32 = s
            .parse()
            .map_err(|e| CliError::Usage(format!("bad float {s}: {e}")))?;
        v.to_bits()
    };
    decompose(bits).map_err(|e| CliError::Domain(format!("input {s}: {e}")))
}

fn eval_table(a: &EvalArgs) -> Result<LookupTable, CliError> {
    if let Some(path) = &a.table_file {
        if a.kind.is_some() || a.addr_bits.is_some() || a.word_bits.is_some() {
            return Err(CliError::Usage(
                "--table-file conflicts with --kind/--addr-bits/--word-bits".into(),
            ));
        }
        let mut f = fs::File::open(path)?;
        return Ok(read_table(&mut f)?);
    }
    match (a.kind, a.addr_bits) {
        (Some(kind), Some(addr_bits)) => Ok(build_from_spec(make_spec(
            kind,
            addr_bits,
            a.word_bits,
            a.interp,
            a.compress,
        ))?),
        _ => Err(CliError::Usage(
            "eval needs either --table-file or both --kind and --addr-bits".into(),
        )),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let table = eval_table(&a)?;
    let x = parse_input(&a.x)?;
    let s = seed(&table, x);
    let operand = engine_operand(x, a.g);
    let trace = iterate(operand, &s, x, a.max_iter, 1.0);
    println!(
        "input: bits {:#010x}, mantissa {:.7} * 2^{}",
        rsqrt_core::fp::compose(x).expect("input was decomposed from bits"),
        1.0 + x.fraction as f64 / 8_388_608.0,
        x.exponent
    );
    println!(
        "seed: {:#09x} * 2^-26 * 2^{} (~{:.7e})",
        s.mantissa.value,
        s.exponent,
        s.to_f64()
    );
    for (i, (ee, ulps)) in trace
        .error_exponents
        .iter()
        .zip(&trace.ulps)
        .enumerate()
    {
        println!("iteration {}: error exponent {ee:.4}, {ulps:.4} ulps", i + 1);
    }
    match (trace.diverged, trace.iterations_to_converge) {
        (false, Some(n)) => println!("converged after {n} iteration(s)"),
        (true, _) if (trace.error_exponents.len() as u32) < a.max_iter => {
            println!(
                "diverged: step signal at iteration {}",
                trace.error_exponents.len() + 1
            )
        }
        _ => println!("did not converge within {} iterations", a.max_iter),
    }
    println!("final error: {:.4} ulps of the reference", trace.final_ulp);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let corpus = gen_corpus(a.prng_seed, a.samples);
    let records = sweep(
        a.kind.into(),
        &a.addr_bits,
        &a.interp,
        &corpus,
        a.g,
        a.max_iter,
    )?;
    let csv = render_csv(&records)?;
    write_text(a.out_file.as_deref(), &csv)
}

fn cmd_verify_bits(a: VerifyBitsArgs) -> Result<(), CliError> {
    let tables: Vec<LookupTable> = match &a.table_file {
        Some(path) => {
            let mut f = fs::File::open(path)?;
            vec![read_table(&mut f)?]
        }
        None => {
            let mut out = Vec::new();
            for &k in &a.addr_bits {
                out.push(build_mlt(k)?);
            }
            out
        }
    };
    for expected in [&a.expect_t2, &a.expect_t3] {
        if !expected.is_empty() && expected.len() != tables.len() {
            return Err(CliError::Usage(format!(
                "expected-threshold list has {} entries for {} tables",
                expected.len(),
                tables.len()
            )));
        }
    }
    let mut mismatches = Vec::new();
    for (i, table) in tables.iter().enumerate() {
        let th = compute_thresholds(table)?;
        println!(
            "addr_bits={}: t2={} t3={}",
            table.spec.addr_bits, th.t2, th.t3
        );
        if let Some(&want) = a.expect_t2.get(i) {
            if want != th.t2 {
                mismatches.push(format!(
                    "addr_bits={}: t2={} expected {}",
                    table.spec.addr_bits, th.t2, want
                ));
            }
        }
        if let Some(&want) = a.expect_t3.get(i) {
            if want != th.t3 {
                mismatches.push(format!(
                    "addr_bits={}: t3={} expected {}",
                    table.spec.addr_bits, th.t3, want
                ));
            }
        }
    }
    if !mismatches.is_empty() {
        return Err(CliError::Domain(format!(
            "threshold mismatch: {}",
            mismatches.join("; ")
        )));
    }
    Ok(())
}

const CSV_HEADER: &str = "kind,addr_bits,word_bits,interp_factor,samples,prng_seed,g,\
                          avg_error_exp_iter1,avg_error_exp_iter2,divergence_pct,avg_iterations,\
                          acceptable_after_1,acceptable_after_2";

fn parse_csv_records(text: &str) -> Result<Vec<SweepRecord>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(CliError::File("unexpected CSV header".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(CliError::File(format!(
                "CSV row {}: expected 13 fields, found {}",
                i + 2,
                f.len()
            )));
        }
        let bad = |what: &str| CliError::File(format!("CSV row {}: bad {what}", i + 2));
        let kind = match f[0] {
            "mlt" => TableKind::Mlt,
            "alt" => TableKind::Alt,
            _ => return Err(bad("kind")),
        };
        let spec = TableSpec {
            kind,
            addr_bits: f[1].parse().map_err(|_| bad("addr_bits"))?,
            word_bits: f[2].parse().map_err(|_| bad("word_bits"))?,
            interp_factor: f[3].parse().map_err(|_| bad("interp_factor"))?,
            compressed: false,
        };
        records.push(SweepRecord {
            spec,
            samples: f[4].parse().map_err(|_| bad("samples"))?,
            prng_seed: f[5].parse().map_err(|_| bad("prng_seed"))?,
            g: f[6].parse().map_err(|_| bad("g"))?,
            avg_error_exp_iter1: f[7].parse().map_err(|_| bad("avg_error_exp_iter1"))?,
            avg_error_exp_iter2: f[8].parse().map_err(|_| bad("avg_error_exp_iter2"))?,
            divergence_pct: f[9].parse().map_err(|_| bad("divergence_pct"))?,
            avg_iterations: f[10].parse().map_err(|_| bad("avg_iterations"))?,
            acceptable_after_1: f[11].parse().map_err(|_| bad("acceptable_after_1"))?,
            acceptable_after_2: f[12].parse().map_err(|_| bad("acceptable_after_2"))?,
            // Raw counts are not serialized; layouts only use the fields above.
            converged: 0,
            diverged: 0,
            fail_after_1: 0,
            fail_after_2: 0,
            max_ulps_after_2: 0.0,
        });
    }
    Ok(records)
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.csv)?;
    let records = parse_csv_records(&text)?;
    let md = render_markdown(&records, a.layout.into())?;
    write_text(a.out_file.as_deref(), &md)
}
