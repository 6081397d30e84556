//! Lookup-table construction: main tables (direct mantissa words), auxiliary
//! tables (per-segment multiplier coefficients), size reduction, word
//! compression, and a bit-exact file format.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use std::fmt;
use std::io::{self, Read, Write};

/// Magic bytes of the table file format.
pub const TABLE_MAGIC: &[u8; 4] = b"RSQT";
/// File format version.
pub const TABLE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Main lookup table: each word is the fraction of rsqrt at a segment
    /// midpoint.
    Mlt,
    /// Auxiliary lookup table: each word is a per-segment coefficient that
    /// multiplies a bit-modified operand.
    Alt,
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Mlt => "mlt",
            TableKind::Alt => "alt",
        })
    }
}

/// Shape of a lookup table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSpec {
    pub kind: TableKind,
    /// Address width k; the full mantissa segment [1,2) splits into 2^k parts.
    pub addr_bits: u32,
    /// Stored word width in bits (23 for main tables, 25 for auxiliary).
    pub word_bits: u32,
    /// Size-reduction factor F; the table stores 2^k/F words plus a guard.
    pub interp_factor: u32,
    /// Whether the three predictable leading bits are stripped (main, F=1).
    pub compressed: bool,
}

impl TableSpec {
    pub fn validate(&self) -> Result<(), TableError> {
        let (kmin, kmax) = match self.kind {
            TableKind::Mlt => (4, 16),
            TableKind::Alt => (6, 16),
        };
        if self.addr_bits < kmin || self.addr_bits > kmax {
            return Err(TableError::InvalidSpec(format!(
                "address bits {} outside [{kmin}, {kmax}]",
                self.addr_bits
            )));
        }
        match self.kind {
            TableKind::Mlt => {
                if self.word_bits < 4 || self.word_bits > 23 {
                    return Err(TableError::InvalidSpec(format!(
                        "main-table word bits {} outside [4, 23]",
                        self.word_bits
                    )));
                }
            }
            TableKind::Alt => {
                if self.word_bits != 25 {
                    return Err(TableError::InvalidSpec(format!(
                        "auxiliary-table word bits must be 25, got {}",
                        self.word_bits
                    )));
                }
            }
        }
        if !self.interp_factor.is_power_of_two() || self.interp_factor > 64 {
            return Err(TableError::InvalidSpec(format!(
                "reduction factor {} not a power of two in [1, 64]",
                self.interp_factor
            )));
        }
        if (self.interp_factor as u64) > (1u64 << self.addr_bits) {
            return Err(TableError::InvalidSpec(
                "reduction factor exceeds table length".into(),
            ));
        }
        if self.compressed
            && (self.kind != TableKind::Mlt || self.word_bits != 23 || self.interp_factor != 1)
        {
            return Err(TableError::InvalidSpec(
                "compression applies only to full 23-bit main tables".into(),
            ));
        }
        Ok(())
    }

    /// Number of stored words: 2^k for a full table, 2^k/F plus one trailing
    /// guard word for a reduced table.
    pub fn stored_len(&self) -> usize {
        let full = 1usize << self.addr_bits;
        if self.interp_factor == 1 {
            full
        } else {
            full / self.interp_factor as usize + 1
        }
    }
}

/// Addresses where the second and third word bits stop being constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitThresholds {
    /// Second bit is 1 exactly for addresses below t2.
    pub t2: u32,
    /// Third bit is unconditionally 1 exactly below t3; beyond, it is the
    /// complement of the second bit.
    pub t3: u32,
}

#[derive(Debug, Clone)]
pub struct LookupTable {
    pub spec: TableSpec,
    pub entries: Vec<u32>,
    /// Present on compressed tables; needed to reconstruct stripped bits.
    pub thresholds: Option<BitThresholds>,
}

#[derive(Debug)]
pub enum TableError {
    InvalidSpec(String),
    Structure(String),
    Io(io::Error),
    Format(String),
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::InvalidSpec(s) => write!(f, "invalid table spec: {s}"),
            TableError::Structure(s) => write!(f, "table structure violation: {s}"),
            TableError::Io(e) => write!(f, "table io error: {e}"),
            TableError::Format(s) => write!(f, "table format error: {s}"),
        }
    }
}

impl std::error::Error for TableError {}

impl From<io::Error> for TableError {
    fn from(e: io::Error) -> Self {
        TableError::Io(e)
    }
}

/// Main-table word at index i (i = 2^k is the virtual guard position):
/// floor(2^w / sqrt(v)) for the segment midpoint v = 1 + (i + 0.5)/2^k,
/// computed exactly as isqrt(2^(2w+23) div V) with V the midpoint in 2^-23
/// units.
fn mlt_word(addr_bits: u32, word_bits: u32, i: u64) -> u32 {
    let v = (1u64 << 23) + i * (1u64 << (23 - addr_bits)) + (1u64 << (22 - addr_bits));
    let num = BigUint::one() << (2 * word_bits + 23) as u64;
    (num / v).sqrt().to_u32().expect("word fits in u32")
}

/// Auxiliary-table coefficient for segment i of a k-bit table (i = 2^k is
/// the virtual guard segment). The coefficient c minimizes the worst relative
/// seed error over the segment, where the seed is c * M(x) and M(x) has its
/// low 23-k fraction bits one's-complemented: c = 2/(rho_min + rho_max) over
/// rho(f) = M(f) * sqrt(v(f)), scanned on a 64-point inclusive grid, rounded
/// into 25 fraction bits.
fn alt_coeff(addr_bits: u32, i: u64) -> u32 {
    let seg = 1u64 << (23 - addr_bits);
    let f0 = i * seg;
    let f1 = f0 + seg - 1;
    let npts = 64u64.min(seg);
    let scale = (1u64 << 23) as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..npts {
        let f = f0 + (j * (f1 - f0)) / (npts - 1);
        let fbar = f0 + (seg - 1 - (f - f0));
        let m = ((1u64 << 23) + fbar) as f64;
        let x = ((1u64 << 23) + f) as f64;
        let rho = m * (x / scale).sqrt() / scale;
        if rho < lo {
            lo = rho;
        }
        if rho > hi {
            hi = rho;
        }
    }
    let c = 2.0 / (lo + hi);
    (c * (1u64 << 25) as f64).round() as u32
}

/// Builds a full main table with 23-bit words.
pub fn build_mlt(addr_bits: u32) -> Result<LookupTable, TableError> {
    build_mlt_words(addr_bits, 23)
}

/// Builds a full main table with the given word width.
pub fn build_mlt_words(addr_bits: u32, word_bits: u32) -> Result<LookupTable, TableError> {
    let spec = TableSpec {
        kind: TableKind::Mlt,
        addr_bits,
        word_bits,
        interp_factor: 1,
        compressed: false,
    };
    spec.validate()?;
    let entries = (0..1u64 << addr_bits)
        .map(|i| mlt_word(addr_bits, word_bits, i))
        .collect();
    Ok(LookupTable {
        spec,
        entries,
        thresholds: None,
    })
}

/// Builds a full auxiliary table with 25-bit coefficients.
pub fn build_alt(addr_bits: u32) -> Result<LookupTable, TableError> {
    let spec = TableSpec {
        kind: TableKind::Alt,
        addr_bits,
        word_bits: 25,
        interp_factor: 1,
        compressed: false,
    };
    spec.validate()?;
    let entries = (0..1u64 << addr_bits)
        .map(|i| alt_coeff(addr_bits, i))
        .collect();
    Ok(LookupTable {
        spec,
        entries,
        thresholds: None,
    })
}

/// Produces the size-reduced variant of a full table.
///
/// Main tables keep every F-th word (point samples stay valid at their
/// addresses) plus the generator's continuation word at virtual address 2^k
/// as a guard. Auxiliary words are per-segment minimax coefficients whose
/// complement span is tied to the segment width, so merging segments
/// invalidates them; the auxiliary reduction therefore regenerates
/// coefficients for the merged k - log2(F) geometry (same stored length).
pub fn reduce(table: &LookupTable, factor: u32) -> Result<LookupTable, TableError> {
    if table.spec.interp_factor != 1 {
        return Err(TableError::InvalidSpec(
            "reduce expects a full (factor 1) table".into(),
        ));
    }
    if table.spec.compressed {
        return Err(TableError::InvalidSpec(
            "reduce expects an uncompressed table".into(),
        ));
    }
    let mut spec = table.spec;
    spec.interp_factor = factor;
    spec.validate()?;
    if factor == 1 {
        return Ok(table.clone());
    }
    let k = table.spec.addr_bits;
    let entries = match table.spec.kind {
        TableKind::Mlt => {
            let mut kept: Vec<u32> = table
                .entries
                .iter()
                .step_by(factor as usize)
                .copied()
                .collect();
            kept.push(mlt_word(k, table.spec.word_bits, 1u64 << k));
            kept
        }
        TableKind::Alt => {
            let kc = k - factor.trailing_zeros();
            (0..=1u64 << kc).map(|i| alt_coeff(kc, i)).collect()
        }
    };
    debug_assert_eq!(entries.len(), spec.stored_len());
    Ok(LookupTable {
        spec,
        entries,
        thresholds: None,
    })
}

/// Scans a full 23-bit main table for the addresses where the second and
/// third word bits change regime, verifying the prefix structure and the
/// complement relation along the way.
pub fn compute_thresholds(table: &LookupTable) -> Result<BitThresholds, TableError> {
    if table.spec.kind != TableKind::Mlt
        || table.spec.word_bits != 23
        || table.spec.interp_factor != 1
        || table.spec.compressed
    {
        return Err(TableError::InvalidSpec(
            "threshold scan expects a full uncompressed 23-bit main table".into(),
        ));
    }
    let bit2 = |e: u32| (e >> 21) & 1;
    let bit3 = |e: u32| (e >> 20) & 1;
    let t2 = table
        .entries
        .iter()
        .take_while(|&&e| bit2(e) == 1)
        .count() as u32;
    for (i, &e) in table.entries.iter().enumerate().skip(t2 as usize) {
        if bit2(e) == 1 {
            return Err(TableError::Structure(format!(
                "second bit set again at address {i}, not a prefix"
            )));
        }
    }
    let t3 = table
        .entries
        .iter()
        .take_while(|&&e| bit3(e) == 1)
        .count() as u32;
    for (i, &e) in table.entries.iter().enumerate().skip(t3 as usize) {
        if bit3(e) != 1 - bit2(e) {
            return Err(TableError::Structure(format!(
                "third bit not the complement of the second at address {i}"
            )));
        }
    }
    Ok(BitThresholds { t2, t3 })
}

/// Strips the three predictable leading bits from every word of a full
/// 23-bit main table, recording the thresholds needed to restore them.
pub fn compress_words(table: &LookupTable) -> Result<LookupTable, TableError> {
    let thresholds = compute_thresholds(table)?;
    let mut spec = table.spec;
    spec.compressed = true;
    Ok(LookupTable {
        spec,
        entries: table.entries.iter().map(|&e| e & 0xF_FFFF).collect(),
        thresholds: Some(thresholds),
    })
}

/// Restores a 23-bit word from its stored low 20 bits and its address:
/// the first bit is always 1, the second is 1 below t2, the third is 1
/// below t3 and the complement of the second beyond.
pub fn decompress_word(word20: u32, addr: u32, thresholds: BitThresholds) -> u32 {
    let bit2 = u32::from(addr < thresholds.t2);
    let bit3 = if addr < thresholds.t3 { 1 } else { 1 - bit2 };
    (1 << 22) | (bit2 << 21) | (bit3 << 20) | (word20 & 0xF_FFFF)
}

/// Linear blend between two stored words at offset j of F, evaluated in
/// integer arithmetic with the quotient truncated toward zero:
/// lo + j*(hi - lo)/F.
pub fn interpolate_words(lo: u32, hi: u32, offset: u32, factor: u32) -> u32 {
    let d = hi as i64 - lo as i64;
    let t = (offset as i64 * d) / factor as i64;
    (lo as i64 + t) as u32
}

impl LookupTable {
    /// Stored word for a full-table address, restoring stripped bits on
    /// compressed tables. Only meaningful for factor-1 tables, where stored
    /// index and address coincide.
    pub fn stored_word(&self, addr: u32) -> u32 {
        let e = self.entries[addr as usize];
        match self.thresholds {
            Some(t) if self.spec.compressed => decompress_word(e, addr, t),
            _ => e,
        }
    }

    /// Offline reconstruction of the full-resolution word at a given address
    /// from a reduced main table, by blending the two surrounding stored
    /// words. Returns None for auxiliary or compressed tables or an address
    /// out of range.
    pub fn reconstruct(&self, addr: u32) -> Option<u32> {
        if self.spec.kind != TableKind::Mlt || self.spec.compressed {
            return None;
        }
        if (addr as u64) >= (1u64 << self.spec.addr_bits) {
            return None;
        }
        let f = self.spec.interp_factor;
        if f == 1 {
            return Some(self.entries[addr as usize]);
        }
        let i = (addr / f) as usize;
        Some(interpolate_words(
            self.entries[i],
            self.entries[i + 1],
            addr % f,
            f,
        ))
    }
}

fn read_exact_buf<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>, TableError> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|_| TableError::Format("truncated table file".into()))?;
    Ok(buf)
}

/// Writes the table in the bit-exact binary format.
pub fn write_table<W: Write>(table: &LookupTable, out: &mut W) -> Result<(), TableError> {
    table.spec.validate()?;
    out.write_all(TABLE_MAGIC)?;
    out.write_all(&[
        TABLE_VERSION,
        match table.spec.kind {
            TableKind::Mlt => 0,
            TableKind::Alt => 1,
        },
        table.spec.addr_bits as u8,
        table.spec.word_bits as u8,
        table.spec.interp_factor.trailing_zeros() as u8,
        u8::from(table.spec.compressed),
        0,
        0,
    ])?;
    if table.spec.compressed {
        let t = table
            .thresholds
            .ok_or_else(|| TableError::Structure("compressed table lacks thresholds".into()))?;
        out.write_all(&t.t2.to_le_bytes())?;
        out.write_all(&t.t3.to_le_bytes())?;
    }
    out.write_all(&(table.entries.len() as u64).to_le_bytes())?;
    for &e in &table.entries {
        out.write_all(&e.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a table back, validating magic, version, shape, and word widths.
pub fn read_table<R: Read>(input: &mut R) -> Result<LookupTable, TableError> {
    let magic = read_exact_buf(input, 4)?;
    if magic != TABLE_MAGIC {
        return Err(TableError::Format("bad magic".into()));
    }
    let head = read_exact_buf(input, 8)?;
    if head[0] != TABLE_VERSION {
        return Err(TableError::Format(format!("unsupported version {}", head[0])));
    }
    let kind = match head[1] {
        0 => TableKind::Mlt,
        1 => TableKind::Alt,
        other => return Err(TableError::Format(format!("unknown kind byte {other}"))),
    };
    if head[4] > 6 {
        return Err(TableError::Format(format!(
            "reduction exponent {} out of range",
            head[4]
        )));
    }
    let spec = TableSpec {
        kind,
        addr_bits: head[2] as u32,
        word_bits: head[3] as u32,
        interp_factor: 1u32 << head[4],
        compressed: head[5] != 0,
    };
    spec.validate().map_err(|e| TableError::Format(e.to_string()))?;
    let thresholds = if spec.compressed {
        let raw = read_exact_buf(input, 8)?;
        Some(BitThresholds {
            t2: u32::from_le_bytes(raw[0..4].try_into().unwrap()),
            t3: u32::from_le_bytes(raw[4..8].try_into().unwrap()),
        })
    } else {
        None
    };
    let count = u64::from_le_bytes(read_exact_buf(input, 8)?[..].try_into().unwrap());
    if count as usize != spec.stored_len() {
        return Err(TableError::Format(format!(
            "entry count {count} does not match spec ({})",
            spec.stored_len()
        )));
    }
    let width = if spec.compressed { 20 } else { spec.word_bits };
    let raw = read_exact_buf(input, count as usize * 4)?;
    let mut entries = Vec::with_capacity(count as usize);
    for chunk in raw.chunks_exact(4) {
        let e = u32::from_le_bytes(chunk.try_into().unwrap());
        if width < 32 && e >= (1u32 << width) {
            return Err(TableError::Format(format!(
                "entry {e:#x} wider than {width} bits"
            )));
        }
        entries.push(e);
    }
    Ok(LookupTable {
        spec,
        entries,
        thresholds,
    })
}

/// Human-readable dump: one line per stored word with its full-resolution
/// address (the guard word is labeled with the virtual address 2^k).
pub fn export_csv<W: Write>(table: &LookupTable, out: &mut W) -> io::Result<()> {
    writeln!(out, "address,value_hex,value_dec")?;
    let f = table.spec.interp_factor as u64;
    for (i, &e) in table.entries.iter().enumerate() {
        writeln!(out, "{},{:#x},{}", i as u64 * f, e, e)?;
    }
    Ok(())
}
