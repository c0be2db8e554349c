//! On-disk formats. Binary files are little-endian; every file carries the
//! config hash and code version.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::config::CODE_VERSION;
use crate::error::{QgError, Result};
use crate::field::{Shape, SpectralField};
use crate::forcing::NoisePath;
use crate::integrator::DiagnosticsRecord;

const NOISE_MAGIC: &[u8; 8] = b"QGNOISE\0";
const SNAP_MAGIC: &[u8; 8] = b"QGSNAP\0\0";
const FORMAT_VERSION: u32 = 1;

/// Convention flags stored in snapshot headers.
pub const FLAG_G_NEGATIVE_INVERSE: u32 = 1;
pub const FLAG_TWO_THIRDS_DEALIAS: u32 = 2;
pub const FLAG_MODE_MAJOR: u32 = 4;
pub const SNAPSHOT_FLAGS: u32 = FLAG_G_NEGATIVE_INVERSE | FLAG_TWO_THIRDS_DEALIAS | FLAG_MODE_MAJOR;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            version: CODE_VERSION.to_string(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!("# config_hash={} version={}", self.config_hash, self.version)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(QgError::Format("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        if n > 4096 {
            return Err(QgError::Format(format!("header string of length {n}")));
        }
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| QgError::Format("header string is not UTF-8".into()))
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<Provenance> {
        if self.take(8)? != magic {
            return Err(QgError::Format("bad magic".into()));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(QgError::Format(format!("unsupported format version {v}")));
        }
        Ok(Provenance {
            config_hash: self.string()?,
            version: self.string()?,
        })
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(QgError::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn header(magic: &[u8; 8], prov: &Provenance) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &prov.config_hash);
    put_str(&mut out, &prov.version);
    out
}

/// Header (seed, mode count, `dt_noise`, first index, step count) then
/// per-mode blocks of the initial draw and the increments.
pub fn encode_noise_path(path: &NoisePath, prov: &Provenance) -> Vec<u8> {
    let mut out = header(NOISE_MAGIC, prov);
    out.extend_from_slice(&path.seed().to_le_bytes());
    out.extend_from_slice(&(path.n_modes() as u64).to_le_bytes());
    out.extend_from_slice(&path.dt_noise().to_le_bytes());
    out.extend_from_slice(&path.start_index().to_le_bytes());
    out.extend_from_slice(&(path.n_steps() as u64).to_le_bytes());
    for x in path.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_noise_path(bytes: &[u8]) -> Result<(NoisePath, Provenance)> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let prov = c.header(NOISE_MAGIC)?;
    let seed = c.u64()?;
    let n_modes = c.u64()? as usize;
    let dt_noise = c.f64()?;
    let start = c.i64()?;
    let n_steps = c.u64()? as usize;
    let count = n_modes
        .checked_mul(n_steps + 1)
        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
        .ok_or_else(|| QgError::Format("noise path size exceeds the file".into()))?;
    let data = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    c.finish()?;
    Ok((NoisePath::from_raw(seed, n_modes, dt_noise, start, n_steps, data)?, prov))
}

/// Header (grid sizes, time, convention flags) then `(re, im)` pairs in
/// mode-major order.
pub fn encode_snapshot(u: &SpectralField, t: f64, prov: &Provenance) -> Vec<u8> {
    let s = u.shape();
    let mut out = header(SNAP_MAGIC, prov);
    for n in [s.nx, s.ny, s.nz] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&SNAPSHOT_FLAGS.to_le_bytes());
    for z in u.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: SpectralField,
    pub t: f64,
    pub flags: u32,
    pub provenance: Provenance,
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let provenance = c.header(SNAP_MAGIC)?;
    let nx = c.u64()? as usize;
    let ny = c.u64()? as usize;
    let nz = c.u64()? as usize;
    let t = c.f64()?;
    let flags = c.u32()?;
    if flags != SNAPSHOT_FLAGS {
        return Err(QgError::Format(format!("unsupported convention flags {flags:#x}")));
    }
    let n = nx
        .checked_mul(ny)
        .and_then(|h| h.checked_mul(nz))
        .filter(|n| n.checked_mul(16).is_some_and(|b| b <= bytes.len()))
        .ok_or_else(|| QgError::Format("snapshot size exceeds the file".into()))?;
    let data = (0..n)
        .map(|_| Ok(Complex64::new(c.f64()?, c.f64()?)))
        .collect::<Result<Vec<_>>>()?;
    c.finish()?;
    Ok(Snapshot {
        field: SpectralField::from_vec(Shape::new(nx, ny, nz), data)?,
        t,
        flags,
        provenance,
    })
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_noise_path(file: &Path, path: &NoisePath, prov: &Provenance) -> Result<()> {
    write_all(file, &encode_noise_path(path, prov))
}

pub fn read_noise_path(file: &Path) -> Result<(NoisePath, Provenance)> {
    decode_noise_path(&read_all(file)?)
}

pub fn write_snapshot(file: &Path, u: &SpectralField, t: f64, prov: &Provenance) -> Result<()> {
    write_all(file, &encode_snapshot(u, t, prov))
}

pub fn read_snapshot(file: &Path) -> Result<Snapshot> {
    decode_snapshot(&read_all(file)?)
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub const DIAGNOSTICS_COLUMNS: &str = "t,H,V,Vdual_liftx,xi,residual,dt";
pub const ATTRACTOR_COLUMNS: &str = "T,diameter,hausdorff_prev,xi_star,slope";

pub fn write_diagnostics_csv<W: Write>(w: &mut W, records: &[DiagnosticsRecord], prov: &Provenance) -> Result<()> {
    writeln!(w, "{}", prov.csv_line())?;
    writeln!(w, "{DIAGNOSTICS_COLUMNS}")?;
    for r in records {
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.t, r.h, r.v, r.vdual_liftx, r.xi, r.residual, r.dt
        )?;
    }
    Ok(())
}

/// One row per horizon: `(T, diameter, hausdorff_prev, xi_star, slope)`.
pub fn write_attractor_csv<W: Write>(w: &mut W, rows: &[[f64; 5]], prov: &Provenance) -> Result<()> {
    writeln!(w, "{}", prov.csv_line())?;
    writeln!(w, "{ATTRACTOR_COLUMNS}")?;
    for r in rows {
        writeln!(w, "{:?},{:?},{:?},{:?},{:?}", r[0], r[1], r[2], r[3], r[4])?;
    }
    Ok(())
}

/// Parse a CSV written by this module back into numeric rows.
pub fn read_csv_rows(text: &str, columns: &str) -> Result<(Provenance, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| QgError::Format("empty CSV".into()))?;
    let mut hash = None;
    let mut version = None;
    for part in head.trim_start_matches('#').split_whitespace() {
        if let Some(v) = part.strip_prefix("config_hash=") {
            hash = Some(v.to_string());
        } else if let Some(v) = part.strip_prefix("version=") {
            version = Some(v.to_string());
        }
    }
    let prov = match (hash, version) {
        (Some(config_hash), Some(version)) => Provenance { config_hash, version },
        _ => return Err(QgError::Format("CSV provenance line missing".into())),
    };
    if lines.next() != Some(columns) {
        return Err(QgError::Format(format!("CSV columns differ from '{columns}'")));
    }
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|x| x.parse::<f64>().map_err(|_| QgError::Format(format!("bad number '{x}'"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((prov, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_round_trip() {
        let p = NoisePath::generate(9, 3, 0.05, -7, 20).unwrap();
        let prov = Provenance::new("abc");
        let bytes = encode_noise_path(&p, &prov);
        let (q, pr) = decode_noise_path(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(pr, prov);
        assert!(decode_noise_path(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let shape = Shape::new(8, 8, 5);
        let data: Vec<Complex64> = (0..shape.len())
            .map(|i| Complex64::new((i as f64).sin() / 3.0, -(i as f64).cos() * 1e-300))
            .collect();
        let u = SpectralField::from_vec(shape, data).unwrap();
        let bytes = encode_snapshot(&u, -2.5, &Provenance::new("h"));
        let s = decode_snapshot(&bytes).unwrap();
        assert_eq!(s.t, -2.5);
        assert!(s.field.data().iter().zip(u.data()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_snapshot(&bad).is_err());
    }

    #[test]
    fn csv_header_and_columns() {
        let r = DiagnosticsRecord {
            t: 0.1,
            h: 1.0,
            v: 2.0,
            vdual_liftx: 0.0,
            xi: 1.5,
            residual: 1e-9,
            dt: 0.025,
        };
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &[r, r], &Provenance::new("ff")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# config_hash=ff version="));
        let (_, rows) = read_csv_rows(&text, DIAGNOSTICS_COLUMNS).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], vec![0.1, 1.0, 2.0, 0.0, 1.5, 1e-9, 0.025]);
    }
}
