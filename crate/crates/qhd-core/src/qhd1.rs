//! The QHD1 field dump format.
//!
//! One record: 8-byte magic "QHD1\0\0\0\0", little-endian u32 version = 1,
//! u32 n_points, f64 dx, f64 time_stamp, u32 n_components, then
//! n_components x n_points interleaved (re, im) f64 pairs, component-major.
//! Trajectory files are plain concatenations of records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::algebra::C64;
use crate::error::{QhdError, Result};
use crate::field::SpinorField;
use crate::grid::GridSpec;

pub const MAGIC: [u8; 8] = *b"QHD1\0\0\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Qhd1Record {
    pub n_points: u32,
    pub dx: f64,
    pub time_stamp: f64,
    pub components: Vec<Vec<C64>>,
}

pub fn write_record<W: Write>(
    w: &mut W,
    dx: f64,
    time_stamp: f64,
    components: &[&[C64]],
) -> Result<()> {
    let n_points = components.first().map(|c| c.len()).unwrap_or(0) as u32;
    for c in components {
        assert_eq!(c.len(), n_points as usize, "ragged component lengths");
    }
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&n_points.to_le_bytes())?;
    w.write_all(&dx.to_le_bytes())?;
    w.write_all(&time_stamp.to_le_bytes())?;
    w.write_all(&(components.len() as u32).to_le_bytes())?;
    for comp in components {
        for v in comp.iter() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_spinor<W: Write>(w: &mut W, psi: &SpinorField) -> Result<()> {
    let comps: Vec<&[C64]> = psi.comps.iter().map(|c| c.as_slice()).collect();
    write_record(w, psi.grid.dx, psi.time_stamp, &comps)
}

/// Real fields are dumped as complex pairs with zero imaginary parts.
pub fn write_real_field<W: Write>(
    w: &mut W,
    dx: f64,
    time_stamp: f64,
    values: &[f64],
) -> Result<()> {
    let buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    write_record(w, dx, time_stamp, &[&buf])
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

/// Read one record; `Ok(None)` at a clean end of stream.
pub fn read_record<R: Read>(r: &mut R) -> Result<Option<Qhd1Record>> {
    let mut magic = [0u8; 8];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if magic != MAGIC {
        return Err(QhdError::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(QhdError::Format(format!("unsupported version {version}")));
    }
    let n_points = read_u32(r)?;
    let dx = read_f64(r)?;
    let time_stamp = read_f64(r)?;
    let n_components = read_u32(r)?;
    if n_points == 0 || n_components == 0 || n_components > 64 {
        return Err(QhdError::Format(format!(
            "implausible record shape: {n_components} x {n_points}"
        )));
    }
    let mut components = Vec::with_capacity(n_components as usize);
    for _ in 0..n_components {
        let mut comp = Vec::with_capacity(n_points as usize);
        for _ in 0..n_points {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            comp.push(C64::new(re, im));
        }
        components.push(comp);
    }
    Ok(Some(Qhd1Record {
        n_points,
        dx,
        time_stamp,
        components,
    }))
}

pub fn read_all_records(path: &Path) -> Result<Vec<Qhd1Record>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    while let Some(rec) = read_record(&mut r)? {
        out.push(rec);
    }
    Ok(out)
}

/// Write a whole spinor trajectory as a record sequence.
pub fn write_trajectory(path: &Path, frames: &[SpinorField]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for f in frames {
        write_spinor(&mut w, f)?;
    }
    Ok(())
}

/// Rebuild spinor frames from a record file. The grid's dt is taken from
/// the frame spacing (single-frame files get dt = dx / 10).
pub fn read_trajectory_frames(path: &Path) -> Result<Vec<SpinorField>> {
    let records = read_all_records(path)?;
    if records.is_empty() {
        return Err(QhdError::Format("empty trajectory file".into()));
    }
    let dt = if records.len() >= 2 {
        records[1].time_stamp - records[0].time_stamp
    } else {
        records[0].dx * 0.1
    };
    records
        .into_iter()
        .map(|rec| {
            if rec.components.len() != 4 {
                return Err(QhdError::Format(format!(
                    "spinor record needs 4 components, got {}",
                    rec.components.len()
                )));
            }
            let grid = GridSpec::new(rec.n_points as usize, rec.dx, dt.max(f64::MIN_POSITIVE))?;
            let mut psi = SpinorField::zeros(grid);
            psi.time_stamp = rec.time_stamp;
            for (a, comp) in rec.components.into_iter().enumerate() {
                psi.comps[a] = comp;
            }
            Ok(psi)
        })
        .collect()
}
