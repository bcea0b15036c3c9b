//! Flat binary field files and 1D CSV slices.
//!
//! Binary layout, all little-endian: magic `HPSF`, `u32` version, `u32` d,
//! `u32` N, `u32` n, `f64` L, then `n * N^d` values of type `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::field::Field;
use super::grid::GridSpec;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HPSF";
const VERSION: u32 = 1;

pub fn write_field<W: Write>(u: &Field, mut w: W) -> Result<()> {
    let g = u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.d as u32).to_le_bytes())?;
    w.write_all(&(g.n_points as u32).to_le_bytes())?;
    w.write_all(&(g.n as u32).to_le_bytes())?;
    w.write_all(&g.length.to_le_bytes())?;
    for v in u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Shape("not a field file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Shape(format!("unsupported field file version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let n_points = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let length = read_f64(&mut r)?;
    let grid = GridSpec::new(d, n_points, length, n)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(read_f64(&mut r)?);
    }
    Field::new(grid, values)
}

pub fn save_field(u: &Field, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(u, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    read_field(BufReader::new(File::open(path)?))
}

/// Shortest decimal text that parses back to exactly `v`: positional for
/// moderate magnitudes, scientific otherwise.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// CSV of the line along axis 0 through the grid point with the given indices
/// on the remaining axes. Columns: `x, u0, u1, ...`.
pub fn write_slice_csv<W: Write>(u: &Field, fixed: &[usize], mut w: W) -> Result<()> {
    let g = u.grid();
    if fixed.len() + 1 != g.d {
        return Err(Error::InvalidArgument(format!(
            "slice needs {} fixed indices for d = {}",
            g.d - 1,
            g.d
        )));
    }
    if fixed.iter().any(|&i| i >= g.n_points) {
        return Err(Error::InvalidArgument("slice index out of range".into()));
    }
    let mut header = String::from("x");
    for c in 0..g.n {
        header.push_str(&format!(",u{c}"));
    }
    writeln!(w, "{header}")?;
    let tail: usize = fixed.iter().fold(0, |acc, &i| acc * g.n_points + i);
    let stride = g.n_points.pow((g.d - 1) as u32);
    for i in 0..g.n_points {
        let p = i * stride + tail;
        let mut line = format_float(i as f64 * g.dx());
        for c in 0..g.n {
            line.push(',');
            line.push_str(&format_float(u.component(c)[p]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_roundtrip_is_exact() {
        let g = GridSpec::new(2, 8, 1.5, 2).unwrap();
        let u = Field::from_fn(g, |x, c| (x[0] * 3.1).sin() + c as f64 * x[1].exp());
        let mut buf = Vec::new();
        write_field(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 16 + 8 + 8 * g.len());
        let v = read_field(&buf[..]).unwrap();
        assert_eq!(v.grid(), u.grid());
        assert_eq!(v.values(), u.values());
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, -0.0, 1.0 / 3.0, 2.2e-16, -7.5e20, 123456.789, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(format_float(2.2e-16), "2.2e-16");
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(read_field(&b"XXXX0000"[..]).is_err());
    }

    #[test]
    fn csv_slice_roundtrips_values() {
        let g = GridSpec::torus(2, 8, 1).unwrap();
        let u = Field::from_fn(g, |x, _| x[0] + 10.0 * x[1]);
        let mut buf = Vec::new();
        write_slice_csv(&u, &[3], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 9);
        let cols: Vec<f64> = rows[3].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(cols[1], u.component(0)[2 * 8 + 3]);
    }
}
