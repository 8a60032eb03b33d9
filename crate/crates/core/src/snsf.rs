//! SNSF binary field snapshots.
//!
//! Layout: magic "SNSF", format version (u32 LE), d (u32 LE), n (u32 LE),
//! then d * n^d grid samples as f64 LE in row-major order, components
//! concatenated.
//!
//! The on-disk payload is physical grid samples, so a read-write cycle of a
//! file is byte-exact; conversion to and from [`SpectralField`] goes through
//! the transform pair and is exact only to round-off.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{SpectralField, D};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"SNSF";
pub const VERSION: u32 = 1;

/// Decoded snapshot payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub samples: [Array2<f64>; D],
}

impl Snapshot {
    pub fn from_field(field: &SpectralField) -> Self {
        Self {
            n: field.grid().n(),
            samples: field.to_grid(),
        }
    }

    /// Rebuild the spectral field; the torus period is not stored and must
    /// be supplied.
    pub fn into_field(&self, length: f64) -> Result<SpectralField> {
        let grid = Grid::with_length(self.n, length)?;
        SpectralField::from_grid(&grid, &self.samples)
    }
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &Snapshot) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(D as u32).to_le_bytes())?;
    w.write_all(&(snap.n as u32).to_le_bytes())?;
    for comp in &snap.samples {
        if comp.dim() != (snap.n, snap.n) {
            return Err(Error::ShapeMismatch {
                expected: snap.n,
                got: comp.dim().0.max(comp.dim().1),
            });
        }
        for &v in comp.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_field_snapshot<W: Write>(w: W, field: &SpectralField) -> Result<()> {
    write_snapshot(w, &Snapshot::from_field(field))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::SnapshotFormat(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::SnapshotFormat(format!(
            "unsupported version {version}"
        )));
    }
    let d = read_u32(&mut r)? as usize;
    if d != D {
        return Err(Error::SnapshotFormat(format!(
            "dimension {d} not supported, expected {D}"
        )));
    }
    let n = read_u32(&mut r)? as usize;
    if n < 4 || n % 2 != 0 {
        return Err(Error::SnapshotFormat(format!("bad grid size {n}")));
    }
    let mut comps: Vec<Array2<f64>> = Vec::with_capacity(D);
    for _ in 0..D {
        let mut data = vec![0.0_f64; n * n];
        for v in data.iter_mut() {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        comps.push(Array2::from_shape_vec((n, n), data).expect("sized above"));
    }
    Ok(Snapshot {
        n,
        samples: [comps[0].clone(), comps[1].clone()],
    })
}

pub fn read_field_snapshot<R: Read>(r: R, length: f64) -> Result<SpectralField> {
    read_snapshot(r)?.into_field(length)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_divfree_field;

    #[test]
    fn file_bytes_roundtrip_exactly() {
        let grid = Grid::new(16).unwrap();
        let f = random_divfree_field(&grid, 2.0, 99);
        let mut buf = Vec::new();
        write_field_snapshot(&mut buf, &f).unwrap();
        assert_eq!(&buf[0..4], MAGIC);

        let snap = read_snapshot(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        write_snapshot(&mut buf2, &snap).unwrap();
        assert_eq!(buf, buf2, "read-write must be byte stable");
    }

    #[test]
    fn field_roundtrip_within_roundoff() {
        let grid = Grid::new(16).unwrap();
        let f = random_divfree_field(&grid, 2.0, 7);
        let mut buf = Vec::new();
        write_field_snapshot(&mut buf, &f).unwrap();
        let g = read_field_snapshot(buf.as_slice(), grid.length()).unwrap();
        let rel = g.sub(&f).max_abs_coeff() / f.max_abs_coeff();
        assert!(rel < 1e-12, "relative error {rel}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot(&b"NOPE"[..]).is_err());
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            read_snapshot(buf.as_slice()),
            Err(Error::SnapshotFormat(_))
        ));
    }
}
