//! Binary field records and plain-text manifests.
//!
//! A record is the 7-byte magic `SPDENZ1`, a fixed little-endian header
//! (dim u8, n u32, l f64, dt f64, kernel code u8, alpha f64, seed u64,
//! replica u64, step u64) and then n^dim little-endian f64 values in
//! row-major order. Records concatenate, so a trajectory dump is a sequence
//! of them in one file.

use crate::error::{LabError, Result};
use crate::kernels::KernelKind;
use crate::rng::RngStream;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 7] = b"SPDENZ1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordHeader {
    pub dim: u8,
    pub n: u32,
    pub l: f64,
    pub dt: f64,
    pub kernel: KernelKind,
    pub alpha: f64,
    pub stream: RngStream,
}

impl RecordHeader {
    pub fn len(&self) -> usize {
        (self.n as usize).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn write_record<W: Write>(w: &mut W, header: &RecordHeader, values: &[f64]) -> Result<()> {
    if values.len() != header.len() {
        return Err(LabError::Input(format!(
            "record holds {} values but header describes {}",
            values.len(),
            header.len()
        )));
    }
    w.write_all(MAGIC)?;
    w.write_all(&[header.dim])?;
    w.write_all(&header.n.to_le_bytes())?;
    w.write_all(&header.l.to_le_bytes())?;
    w.write_all(&header.dt.to_le_bytes())?;
    w.write_all(&[header.kernel.code()])?;
    w.write_all(&header.alpha.to_le_bytes())?;
    w.write_all(&header.stream.master_seed.to_le_bytes())?;
    w.write_all(&header.stream.replica_id.to_le_bytes())?;
    w.write_all(&header.stream.step_index.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Read the next record, or `None` at a clean end of input.
pub fn read_record<R: Read>(r: &mut R) -> Result<Option<(RecordHeader, Vec<f64>)>> {
    let mut magic = [0u8; 7];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(LabError::Input("not a field record: bad magic".into()));
    }
    let dim = take::<1, _>(r)?[0];
    let n = u32::from_le_bytes(take(r)?);
    let l = f64::from_le_bytes(take(r)?);
    let dt = f64::from_le_bytes(take(r)?);
    let code = take::<1, _>(r)?[0];
    let kernel = KernelKind::from_code(code)
        .ok_or_else(|| LabError::Input(format!("unknown kernel code {code} in record")))?;
    let alpha = f64::from_le_bytes(take(r)?);
    let seed = u64::from_le_bytes(take(r)?);
    let replica = u64::from_le_bytes(take(r)?);
    let step = u64::from_le_bytes(take(r)?);
    if !(1..=2).contains(&dim) || n == 0 {
        return Err(LabError::Input(format!("record header has dim {dim}, n {n}")));
    }
    let header = RecordHeader { dim, n, l, dt, kernel, alpha, stream: RngStream::new(seed, replica, step) };
    let mut values = Vec::with_capacity(header.len());
    for _ in 0..header.len() {
        values.push(f64::from_le_bytes(take(r)?));
    }
    Ok(Some((header, values)))
}

pub fn write_records(path: &Path, records: &[(RecordHeader, &[f64])]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (h, v) in records {
        write_record(&mut w, h, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<(RecordHeader, Vec<f64>)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    while let Some(rec) = read_record(&mut r)? {
        out.push(rec);
    }
    Ok(out)
}

/// Write `key = value` lines in the given order.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// 64-bit FNV-1a hash, used for compact configuration fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(dim: u8, n: u32) -> RecordHeader {
        RecordHeader {
            dim,
            n,
            l: 2.5,
            dt: 1e-3,
            kernel: KernelKind::Riesz,
            alpha: 0.5,
            stream: RngStream::new(11, 3, 9),
        }
    }

    #[test]
    fn roundtrip_preserves_bits() {
        let h = header(2, 4);
        let values: Vec<f64> = (0..16).map(|i| (i as f64).sin() * 1e-7 - 0.0).collect();
        let mut buf = Vec::new();
        write_record(&mut buf, &h, &values).unwrap();
        write_record(&mut buf, &header(1, 2), &[f64::MIN_POSITIVE, -0.0]).unwrap();
        assert_eq!(buf.len(), 2 * (7 + 1 + 4 + 8 + 8 + 1 + 8 + 24) + 18 * 8);
        let mut r = buf.as_slice();
        let (h2, v2) = read_record(&mut r).unwrap().unwrap();
        assert_eq!(h2, h);
        assert_eq!(v2.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let (_, v3) = read_record(&mut r).unwrap().unwrap();
        assert_eq!(v3[1].to_bits(), (-0.0f64).to_bits());
        assert!(read_record(&mut r).unwrap().is_none());
    }

    #[test]
    fn header_layout_is_little_endian() {
        let mut buf = Vec::new();
        write_record(&mut buf, &header(1, 1), &[1.0]).unwrap();
        assert_eq!(&buf[..7], b"SPDENZ1");
        assert_eq!(buf[7], 1);
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..20], &2.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_bad_input() {
        let mut buf = Vec::new();
        assert!(write_record(&mut buf, &header(1, 4), &[1.0]).is_err());
        let junk = b"NOTAREC and more bytes".to_vec();
        assert!(matches!(read_record(&mut junk.as_slice()), Err(LabError::Input(_))));
        let mut good = Vec::new();
        write_record(&mut good, &header(1, 4), &[1.0; 4]).unwrap();
        good.truncate(good.len() - 3);
        assert!(matches!(read_record(&mut good.as_slice()), Err(LabError::Io(_))));
    }

    #[test]
    fn fnv_reference() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
