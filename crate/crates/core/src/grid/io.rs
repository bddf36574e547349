//! Field dumps.
//!
//! Binary layout (little endian):
//!
//! ```text
//! offset  size  content
//! 0       4     magic b"HLFD"
//! 4       4     u32 format version (1)
//! 8       4     u32 dim
//! 12      4     u32 n (points per axis)
//! 16      8     f64 side length L
//! 24      8*N   f64 samples, N = n^dim, lexicographic order (last axis fastest)
//! ```
//!
//! CSV layout: a `dim,n,length` header line, one line with those three
//! values, a `value` header line, then one sample per line in the same order.
//! Floats are written with 17 significant digits.

use std::io::{BufRead, BufReader, Read, Write};

use super::{ScalarField, TorusGrid};
use crate::error::{Error, Result};
use crate::numerics::fmt17;

pub const MAGIC: &[u8; 4] = b"HLFD";
pub const VERSION: u32 = 1;

pub fn write_binary<W: Write>(field: &ScalarField, mut w: W) -> Result<()> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.length().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<ScalarField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Serde("not a field dump (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Serde(format!("unsupported field format version {version}")));
    }
    let dim = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    let grid = TorusGrid::new(dim, n, length)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    ScalarField::new(grid, values)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_csv<W: Write>(field: &ScalarField, mut w: W) -> Result<()> {
    let g = field.grid();
    writeln!(w, "dim,n,length")?;
    writeln!(w, "{},{},{}", g.dim(), g.n(), fmt17(g.length()))?;
    writeln!(w, "value")?;
    for v in field.values() {
        writeln!(w, "{}", fmt17(*v))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<ScalarField> {
    let mut lines = BufReader::new(r).lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Serde("truncated field csv".into()))?
            .map_err(Error::from)
    };
    if next()?.trim() != "dim,n,length" {
        return Err(Error::Serde("field csv: missing dim,n,length header".into()));
    }
    let meta = next()?;
    let parts: Vec<&str> = meta.trim().split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Serde(format!("field csv: bad metadata line {meta:?}")));
    }
    let parse_err = |s: &str| Error::Serde(format!("field csv: cannot parse {s:?}"));
    let dim: usize = parts[0].parse().map_err(|_| parse_err(parts[0]))?;
    let n: usize = parts[1].parse().map_err(|_| parse_err(parts[1]))?;
    let length: f64 = parts[2].parse().map_err(|_| parse_err(parts[2]))?;
    if next()?.trim() != "value" {
        return Err(Error::Serde("field csv: missing value header".into()));
    }
    let grid = TorusGrid::new(dim, n, length)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let line = next()?;
        values.push(line.trim().parse::<f64>().map_err(|_| parse_err(&line))?);
    }
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> ScalarField {
        let g = TorusGrid::new(2, 8, 1.25).unwrap();
        g.sample(|x| (x[0] * 3.1).sin() + x[1] / 7.0).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 64);
        let back = read_binary(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(read_binary(&b"XXXX\x01\0\0\0"[..]).is_err());
    }
}
