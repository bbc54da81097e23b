//! Flat binary storage for stacks of fields and per-step energy sidecars.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic  b"CNSFIELD"        8 bytes
//! version                   (currently 1)
//! frames                    number of stored fields (T + 1 for a trajectory)
//! height, width, channels
//! dtype                     1 = f32 little-endian
//! data                      frames × channels × height × width values,
//!                           channel-major then row-major within each frame
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CnsError, Result};
use crate::field::{Field, GridShape};
use crate::noise::{csv_err, parse_field};
use crate::solvers::Trajectory;

pub const MAGIC: &[u8; 8] = b"CNSFIELD";
pub const VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;
const HEADER_LEN: usize = 8 + 6 * 4;

pub fn write_fields(path: &Path, fields: &[Field]) -> Result<()> {
    let shape = match fields.first() {
        Some(f) => f.shape(),
        None => return Err(CnsError::invalid("cannot store an empty field stack")),
    };
    for f in fields {
        shape.ensure_eq(&f.shape())?;
    }
    let file = File::create(path).map_err(|e| CnsError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        fields.len() as u32,
        shape.height as u32,
        shape.width as u32,
        shape.channels as u32,
        DTYPE_F32,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header).map_err(|e| CnsError::io(path, e))?;
    for f in fields {
        for &v in f.as_slice() {
            w.write_all(&(v as f32).to_le_bytes())
                .map_err(|e| CnsError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CnsError::io(path, e))
}

pub fn read_fields(path: &Path) -> Result<Vec<Field>> {
    let file = File::open(path).map_err(|e| CnsError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| CnsError::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(CnsError::corrupt(path, "file shorter than header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(CnsError::corrupt(path, "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes"));
    let version = word(0);
    if version != VERSION {
        return Err(CnsError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let frames = word(1) as usize;
    let shape = GridShape::new(word(2) as usize, word(3) as usize, word(4) as usize)
        .map_err(|e| CnsError::corrupt(path, e.to_string()))?;
    if word(5) != DTYPE_F32 {
        return Err(CnsError::corrupt(path, format!("unsupported dtype code {}", word(5))));
    }
    let expected = HEADER_LEN + frames * shape.len() * 4;
    if bytes.len() != expected {
        return Err(CnsError::corrupt(
            path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    values
        .chunks_exact(shape.len())
        .map(|c| Field::from_vec(shape, c.to_vec()))
        .collect()
}

/// Writes `states` to `path` and per-step energies to `energy_path`.
pub fn write_trajectory(path: &Path, energy_path: &Path, traj: &Trajectory) -> Result<()> {
    write_fields(path, &traj.states)?;
    write_energies(energy_path, &traj.times, &traj.per_step_energy)
}

pub fn write_energies(path: &Path, times: &[f64], energies: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["step", "t", "energy"]).map_err(|e| csv_err(path, e))?;
    for (k, e) in energies.iter().enumerate() {
        w.write_record([k.to_string(), times[k].to_string(), e.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CnsError::io(path, e))
}

/// `(times, energies)` from an energy sidecar.
pub fn read_energies(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut times = Vec::new();
    let mut energies = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        times.push(parse_field(path, &rec, 1)?);
        energies.push(parse_field(path, &rec, 2)?);
    }
    Ok((times, energies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white_noise;
    use crate::rng::root_rng;

    #[test]
    fn round_trip_at_f32_precision() {
        let shape = GridShape::new(3, 4, 2).unwrap();
        let mut rng = root_rng(0);
        let fields: Vec<Field> = (0..5).map(|_| white_noise(shape, &mut rng)).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_fields(&p, &fields).unwrap();
        let back = read_fields(&p).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in fields.iter().zip(&back) {
            assert!(a.max_abs_diff(b) < 1e-6);
        }
        // stored values are exactly representable, so a second pass is lossless
        write_fields(&p, &back).unwrap();
        assert_eq!(read_fields(&p).unwrap(), back);
    }

    #[test]
    fn truncated_and_foreign_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_fields(&p, &[Field::zeros(GridShape::square(2))]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_fields(&p), Err(CnsError::CorruptFile { .. })));
        let mut bad = bytes.clone();
        bad[8] = 9;
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(read_fields(&p), Err(CnsError::VersionMismatch { found: 9, .. })));
        std::fs::write(&p, b"nonsense").unwrap();
        assert!(matches!(read_fields(&p), Err(CnsError::CorruptFile { .. })));
        assert!(matches!(read_fields(&dir.path().join("missing")), Err(CnsError::Io { .. })));
    }

    #[test]
    fn energies_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_energies(&p, &[0.0, 0.5, 1.0], &[0.1, 0.2]).unwrap();
        let (t, e) = read_energies(&p).unwrap();
        assert_eq!(t, vec![0.0, 0.5]);
        assert_eq!(e, vec![0.1, 0.2]);
    }
}
