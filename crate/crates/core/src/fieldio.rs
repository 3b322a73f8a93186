//! The `ZKF1` binary field format.
//!
//! Layout (little-endian): magic `ZKF1`, `u32 nx`, `u32 ny`, `f64 lx`,
//! `f64 ly`, `u8` domain tag (0 space samples, 1 spectral coefficients as
//! interleaved re/im), then the `f64` payload in row-major order.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, ZkError};
use crate::grid::{Grid, RealField, SpectralField};

pub const MAGIC: &[u8; 4] = b"ZKF1";

#[derive(Clone, Debug)]
pub enum StoredField {
    Space(RealField),
    Spectral(SpectralField),
}

fn header(w: &mut impl Write, g: &Grid, tag: u8) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(g.nx() as u32).to_le_bytes())?;
    w.write_all(&(g.ny() as u32).to_le_bytes())?;
    w.write_all(&g.lx().to_le_bytes())?;
    w.write_all(&g.ly().to_le_bytes())?;
    w.write_all(&[tag])?;
    Ok(())
}

pub fn write_real(w: &mut impl Write, f: &RealField) -> Result<()> {
    header(w, f.grid(), 0)?;
    for v in f.samples() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_spectral(w: &mut impl Write, f: &SpectralField) -> Result<()> {
    header(w, f.grid(), 1)?;
    for c in f.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| ZkError::Format(format!("truncated input: {e}")))?;
    Ok(b)
}

/// Read a field. The grid is rebuilt with the default dealiasing rule.
pub fn read(r: &mut impl Read) -> Result<StoredField> {
    if &take::<4>(r)? != MAGIC {
        return Err(ZkError::Format("bad magic".into()));
    }
    let nx = u32::from_le_bytes(take(r)?) as usize;
    let ny = u32::from_le_bytes(take(r)?) as usize;
    let lx = f64::from_le_bytes(take(r)?);
    let ly = f64::from_le_bytes(take(r)?);
    let tag = take::<1>(r)?[0];
    let grid: Arc<Grid> = Grid::new(nx, ny, lx, ly)?;
    let n = grid.len();
    match tag {
        0 => {
            let mut s = Vec::with_capacity(n);
            for _ in 0..n {
                s.push(f64::from_le_bytes(take(r)?));
            }
            Ok(StoredField::Space(RealField::new(grid, s)?))
        }
        1 => {
            let mut c = Vec::with_capacity(n);
            for _ in 0..n {
                let re = f64::from_le_bytes(take(r)?);
                let im = f64::from_le_bytes(take(r)?);
                c.push(Complex64::new(re, im));
            }
            Ok(StoredField::Spectral(SpectralField::new(grid, c)?))
        }
        t => Err(ZkError::Format(format!("unknown domain tag {t}"))),
    }
}

pub fn save_real(path: impl AsRef<Path>, f: &RealField) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_real(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn save_spectral(path: impl AsRef<Path>, f: &SpectralField) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_spectral(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<StoredField> {
    read(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{forward, make_grid};

    #[test]
    fn round_trip_both_domains() {
        let g = make_grid(8, 10, 3.0, 4.5).unwrap();
        let f = RealField::from_fn(g, |x, y| x.sin() * y + 0.25);
        let mut buf = Vec::new();
        write_real(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 4 + 8 + 16 + 1 + 8 * 80);
        match read(&mut buf.as_slice()).unwrap() {
            StoredField::Space(r) => assert_eq!(r.samples(), f.samples()),
            _ => panic!("wrong domain"),
        }
        let s = forward(&f);
        let mut buf = Vec::new();
        write_spectral(&mut buf, &s).unwrap();
        match read(&mut buf.as_slice()).unwrap() {
            StoredField::Spectral(r) => assert_eq!(r.coeffs(), s.coeffs()),
            _ => panic!("wrong domain"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read(&mut &b"ZKF2\0\0\0\0"[..]).is_err());
        assert!(read(&mut &b"ZKF1\x08\0\0\0"[..]).is_err());
    }
}
