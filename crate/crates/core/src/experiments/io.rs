//! CSV tables and binary coefficient dumps.
//!
//! Dump layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "SQLABDMP"
//! version  u32      DUMP_VERSION
//! modes    u32      M
//! count    u64      number of fields
//! seed     u64
//! purpose  u32
//! reserved u32      0
//! then count * M * M pairs (re: f64, im: f64) in FFT order, row-major
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::random::RngStream;
use crate::spectral::{SpectralField, TorusGrid};

pub const DUMP_MAGIC: &[u8; 8] = b"SQLABDMP";
pub const DUMP_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub version: u32,
    pub modes: u32,
    pub count: u64,
    pub seed: u64,
    pub purpose: u32,
}

pub fn write_dump(path: &Path, fields: &[SpectralField], stream: &RngStream) -> Result<()> {
    let modes = fields.first().map_or(0, |f| f.grid().modes());
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(modes as u32).to_le_bytes())?;
    w.write_all(&(fields.len() as u64).to_le_bytes())?;
    w.write_all(&stream.seed.to_le_bytes())?;
    w.write_all(&stream.purpose.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for f in fields {
        if f.grid().modes() != modes {
            return Err(Error::GridMismatch(modes, f.grid().modes()));
        }
        for c in f.coeffs().iter() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated dump: {e}")))?;
    Ok(b)
}

pub fn read_dump(path: &Path) -> Result<(DumpHeader, Vec<SpectralField>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    if &take::<8>(&mut r)? != DUMP_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported dump version {version}")));
    }
    let header = DumpHeader {
        version,
        modes: u32::from_le_bytes(take(&mut r)?),
        count: u64::from_le_bytes(take(&mut r)?),
        seed: u64::from_le_bytes(take(&mut r)?),
        purpose: u32::from_le_bytes(take(&mut r)?),
    };
    let _reserved = take::<4>(&mut r)?;
    let mut fields = Vec::new();
    if header.count > 0 {
        let grid = TorusGrid::new(header.modes as usize).map_err(|e| Error::Format(e.to_string()))?;
        let m = grid.modes();
        for _ in 0..header.count {
            let mut coeffs = Array2::<Complex64>::zeros((m, m));
            for c in coeffs.iter_mut() {
                let re = f64::from_le_bytes(take(&mut r)?);
                let im = f64::from_le_bytes(take(&mut r)?);
                *c = Complex64::new(re, im);
            }
            fields.push(SpectralField::from_coeffs(&grid, coeffs)?);
        }
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after last field".into()));
    }
    Ok((header, fields))
}

/// Plot-ready table with a fixed column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gff_sample, purpose};

    #[test]
    fn dump_round_trip() {
        let g = TorusGrid::new(8).unwrap();
        let s = RngStream::new(3, purpose::GFF_DUMP);
        let fields: Vec<_> = (0..3).map(|i| gff_sample(&g, &s.for_replica(i))).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_dump(&p, &fields, &s).unwrap();
        let (h, back) = read_dump(&p).unwrap();
        assert_eq!(h, DumpHeader { version: 1, modes: 8, count: 3, seed: 3, purpose: purpose::GFF_DUMP });
        for (a, b) in fields.iter().zip(&back) {
            assert_eq!(a.max_abs_diff(b), 0.0);
        }
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 40 + 3 * 64 * 16);
    }

    #[test]
    fn corrupt_dumps_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"NOTADUMP....").unwrap();
        assert!(matches!(read_dump(&p), Err(Error::Format(_))));
        let g = TorusGrid::new(8).unwrap();
        write_dump(&p, &[SpectralField::zeros(&g)], &RngStream::new(0, 0)).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_dump(&p), Err(Error::Format(_))));
    }

    #[test]
    fn table_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("gaps", &["level", "gap"]);
        t.push(vec![1.0, 0.5]);
        t.push(vec![2.0, 0.125]);
        t.write(dir.path()).unwrap();
        let s = std::fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
        assert_eq!(s, "level,gap\n1,0.5\n2,0.125\n");
    }
}
