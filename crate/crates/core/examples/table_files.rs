//! Saving and loading tables.
//!
//! Binary files carry a magic, a version, the table kind and a CRC32, and
//! load back bit for bit. The text form is for eyeballing only.

use approx_rv::fit::{
    decode, encode, export_table, fit_constant, fit_gaussian_dyadic, fit_ncchi2, import_table,
    AnyTable, Construction, TableFormat,
};

fn main() -> approx_rv::Result<()> {
    let dir = std::env::temp_dir().join("approx_rv_tables");
    std::fs::create_dir_all(&dir)?;

    let tables = [
        AnyTable::Constant(fit_constant(8, Construction::L1)?),
        AnyTable::Dyadic(fit_gaussian_dyadic(3, 15, 0.5)?),
        AnyTable::NcChi2(fit_ncchi2(2.0, 16, 1, 8)?),
    ];
    for t in &tables {
        let path = dir.join(format!("{}.arvt", t.kind_name()));
        export_table(t, &path, TableFormat::Binary)?;
        let back = import_table(&path)?;
        let same = back
            .payload()
            .iter()
            .zip(t.payload())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        println!(
            "{:<8} {:>6} bytes, round trip exact: {same}",
            t.kind_name(),
            std::fs::metadata(&path)?.len()
        );
        export_table(t, &path.with_extension("txt"), TableFormat::Text)?;
    }

    // A flipped bit is caught by the checksum.
    let mut bytes = encode(&tables[0]);
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    match decode(&bytes) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted file rejected: {e}"),
    }
    println!("files in {}", dir.display());
    Ok(())
}
