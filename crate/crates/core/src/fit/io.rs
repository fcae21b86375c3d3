//! Binary table files and a plain-text dump for inspection.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `ARVT` |
//! | 2 | format version (1) |
//! | 1 | kind: 0 constant, 1 dyadic, 2 non-central χ² |
//! | 1 | polynomial degree (0 for constant tables) |
//! | 4 | count A: values (constant), `K` (dyadic, χ²) |
//! | 4 | count B: construction code (constant), `K + 1` (dyadic), knots (χ²) |
//! | 8·n | f64 payload |
//! | 4 | CRC-32 of every preceding byte |
//!
//! Payloads: constant tables store their values; dyadic tables store the
//! decay rate followed by the coefficient-major array; χ² tables store `ν`
//! followed, per knot, by the lower then the upper coefficient arrays.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::constant::{ConstantTable, Construction};
use super::dyadic::DyadicPolyTable;
use super::ncchi2::NcChi2Table;
use crate::error::{Error, FormatError, Result};

pub const MAGIC: &[u8; 4] = b"ARVT";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

const KIND_CONSTANT: u8 = 0;
const KIND_DYADIC: u8 = 1;
const KIND_NCCHI2: u8 = 2;

/// Any of the table kinds that can be stored in a file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTable {
    Constant(ConstantTable),
    Dyadic(DyadicPolyTable),
    NcChi2(NcChi2Table),
}

impl AnyTable {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnyTable::Constant(_) => "constant",
            AnyTable::Dyadic(_) => "dyadic",
            AnyTable::NcChi2(_) => "ncchi2",
        }
    }

    /// All stored floating point numbers in file order.
    pub fn payload(&self) -> Vec<f64> {
        match self {
            AnyTable::Constant(t) => t.values().to_vec(),
            AnyTable::Dyadic(t) => {
                let mut p = vec![t.decay_rate()];
                p.extend(t.coeffs().iter().flatten());
                p
            }
            AnyTable::NcChi2(t) => {
                let mut p = vec![t.nu()];
                for (lo, up) in t.lower().iter().zip(t.upper()) {
                    p.extend(lo.coeffs().iter().flatten());
                    p.extend(up.coeffs().iter().flatten());
                }
                p
            }
        }
    }
}

impl From<ConstantTable> for AnyTable {
    fn from(t: ConstantTable) -> Self {
        AnyTable::Constant(t)
    }
}
impl From<DyadicPolyTable> for AnyTable {
    fn from(t: DyadicPolyTable) -> Self {
        AnyTable::Dyadic(t)
    }
}
impl From<NcChi2Table> for AnyTable {
    fn from(t: NcChi2Table) -> Self {
        AnyTable::NcChi2(t)
    }
}

/// Serializes a table to the binary file format.
pub fn encode(table: &AnyTable) -> Vec<u8> {
    let (kind, degree, a, b) = match table {
        AnyTable::Constant(t) => (KIND_CONSTANT, 0u8, t.len() as u32, t.construction().code()),
        AnyTable::Dyadic(t) => (
            KIND_DYADIC,
            t.degree() as u8,
            t.n_intervals() as u32,
            t.n_intervals() as u32 + 1,
        ),
        AnyTable::NcChi2(t) => (
            KIND_NCCHI2,
            t.degree() as u8,
            t.n_intervals() as u32,
            t.n_knots() as u32,
        ),
    };
    let payload = table.payload();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.push(degree);
    out.extend_from_slice(&a.to_le_bytes());
    out.extend_from_slice(&b.to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Format(FormatError::Malformed(msg.into()))
}

// Splits the flat coefficient-major block into rows.
fn rows(data: &[f64], degree: usize, entries: usize) -> Vec<Vec<f64>> {
    data.chunks(entries)
        .take(degree + 1)
        .map(|c| c.to_vec())
        .collect()
}

/// Parses the binary file format. Checks run in the order magic, version,
/// length, checksum, contents; nothing is returned unless all pass.
pub fn decode(bytes: &[u8]) -> Result<AnyTable> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    if bytes.len() < 6 {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN + 4,
            found: bytes.len(),
        }
        .into());
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: VERSION,
        }
        .into());
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN + 4,
            found: bytes.len(),
        }
        .into());
    }
    let kind = bytes[6];
    let degree = bytes[7] as usize;
    let a = u32_at(bytes, 8) as usize;
    let b = u32_at(bytes, 12) as usize;
    let n_floats = match kind {
        KIND_CONSTANT => a,
        KIND_DYADIC => 1 + (degree + 1) * b,
        KIND_NCCHI2 => 1 + 2 * b * (degree + 1) * (a + 1),
        other => return Err(malformed(format!("unknown table kind {other}"))),
    };
    let needed = n_floats
        .checked_mul(8)
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| malformed("declared size overflows"))?;
    if bytes.len() < needed {
        return Err(FormatError::Truncated {
            needed,
            found: bytes.len(),
        }
        .into());
    }
    if bytes.len() > needed {
        return Err(malformed(format!(
            "{} trailing bytes after checksum",
            bytes.len() - needed
        )));
    }
    let stored = u32_at(bytes, needed - 4);
    let computed = crc32fast::hash(&bytes[..needed - 4]);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { stored, computed }.into());
    }
    let floats: Vec<f64> = bytes[HEADER_LEN..needed - 4]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let bad = |e: Error| match e {
        Error::Config(msg) => malformed(msg),
        other => other,
    };
    match kind {
        KIND_CONSTANT => {
            let construction = Construction::from_code(b as u32)
                .ok_or_else(|| malformed(format!("unknown construction code {b}")))?;
            Ok(AnyTable::Constant(
                ConstantTable::from_values(floats, construction).map_err(bad)?,
            ))
        }
        KIND_DYADIC => {
            if b != a + 1 {
                return Err(malformed(format!(
                    "dyadic entry count {b} does not match {a} intervals"
                )));
            }
            let t = DyadicPolyTable::from_coeffs(floats[0], rows(&floats[1..], degree, b))
                .map_err(bad)?;
            Ok(AnyTable::Dyadic(t))
        }
        _ => {
            let entries = a + 1;
            let block = (degree + 1) * entries;
            let mut lower = Vec::with_capacity(b);
            let mut upper = Vec::with_capacity(b);
            for j in 0..b {
                let start = 1 + 2 * j * block;
                lower.push(
                    DyadicPolyTable::from_coeffs(
                        0.5,
                        rows(&floats[start..start + block], degree, entries),
                    )
                    .map_err(bad)?,
                );
                upper.push(
                    DyadicPolyTable::from_coeffs(
                        0.5,
                        rows(&floats[start + block..start + 2 * block], degree, entries),
                    )
                    .map_err(bad)?,
                );
            }
            Ok(AnyTable::NcChi2(
                NcChi2Table::from_parts(floats[0], lower, upper).map_err(bad)?,
            ))
        }
    }
}

/// On-disk representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Binary,
    /// One value per line with 17 significant digits; for inspection only.
    Text,
}

/// Writes a table. Binary files are written to a temporary sibling and
/// renamed so that a failed write never leaves a partial file behind.
pub fn export_table(table: &AnyTable, path: &Path, format: TableFormat) -> Result<()> {
    let bytes = match format {
        TableFormat::Binary => encode(table),
        TableFormat::Text => to_text(table).into_bytes(),
    };
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a binary table file.
pub fn import_table(path: &Path) -> Result<AnyTable> {
    decode(&fs::read(path)?)
}

/// Human-readable dump: a commented header, then one value per line.
pub fn to_text(table: &AnyTable) -> String {
    let mut s = String::new();
    match table {
        AnyTable::Constant(t) => {
            s.push_str(&format!(
                "# kind=constant q={} construction={}\n",
                t.q(),
                t.construction().name()
            ));
        }
        AnyTable::Dyadic(t) => {
            s.push_str(&format!(
                "# kind=dyadic degree={} intervals={} decay_rate={}\n# payload: decay rate, then coefficient-major rows\n",
                t.degree(),
                t.n_intervals(),
                t.decay_rate()
            ));
        }
        AnyTable::NcChi2(t) => {
            s.push_str(&format!(
                "# kind=ncchi2 nu={} degree={} intervals={} knots={}\n# payload: nu, then per knot lower and upper rows\n",
                t.nu(),
                t.degree(),
                t.n_intervals(),
                t.n_knots()
            ));
        }
    }
    for v in table.payload() {
        s.push_str(&format!("{v:.16e}\n"));
    }
    s
}
