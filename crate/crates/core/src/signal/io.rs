//! Recording containers: the `NCR1` binary format and a CSV alternative.
//!
//! `NCR1` layout (little-endian):
//!
//! ```text
//! "NCR1" | u32 n_channels | u32 n_samples | f64 fs
//!        | n_channels × (ASCII label, 0x00)
//!        | n_channels × n_samples × f32   (channel-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Recording, TrialMeta};
use crate::error::{Error, Result};

pub const NCR1_MAGIC: &[u8; 4] = b"NCR1";

pub fn write_ncr1<W: Write>(recording: &Recording, mut w: W) -> Result<()> {
    w.write_all(NCR1_MAGIC)?;
    w.write_all(&(recording.n_channels() as u32).to_le_bytes())?;
    w.write_all(&(recording.n_samples() as u32).to_le_bytes())?;
    w.write_all(&recording.fs.to_le_bytes())?;
    for label in &recording.channels {
        if !label.is_ascii() || label.as_bytes().contains(&0) {
            return Err(Error::format(format!("channel label {label:?} is not storable as NUL-terminated ASCII")));
        }
        w.write_all(label.as_bytes())?;
        w.write_all(&[0])?;
    }
    for row in recording.samples.rows() {
        for &v in row {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
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

pub(crate) fn read_cstr<R: Read>(r: &mut R) -> Result<String> {
    let mut out = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == 0 {
            break;
        }
        out.push(byte[0]);
    }
    String::from_utf8(out).map_err(|_| Error::format("channel label is not ASCII"))
}

pub fn read_ncr1<R: Read>(mut r: R, meta: TrialMeta) -> Result<Recording> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != NCR1_MAGIC {
        return Err(Error::format(format!("bad magic {magic:?}, expected NCR1")));
    }
    let n_channels = read_u32(&mut r)? as usize;
    let n_samples = read_u32(&mut r)? as usize;
    let fs = read_f64(&mut r)?;
    let channels = (0..n_channels).map(|_| read_cstr(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut buf = vec![0u8; n_channels * n_samples * 4];
    r.read_exact(&mut buf)?;
    let values: Vec<f64> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let samples = Array2::from_shape_vec((n_channels, n_samples), values)
        .map_err(|e| Error::format(e.to_string()))?;
    Recording::new(samples, fs, channels, meta)
}

pub fn save_ncr1(recording: &Recording, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ncr1(recording, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_ncr1(path: &Path, meta: TrialMeta) -> Result<Recording> {
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::from(e).context(&label))?;
    read_ncr1(BufReader::new(file), meta).map_err(|e| e.context(&label))
}

/// CSV: header row of channel labels, then one row per time step.
pub fn load_csv(path: &Path, fs: f64, meta: TrialMeta) -> Result<Recording> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(e.to_string()))?;
    let channels: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::format(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::format(e.to_string()))?;
        if record.len() != channels.len() {
            return Err(Error::format(format!("row {} has {} fields, expected {}", line + 2, record.len(), channels.len())));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("row {}: cannot parse {field:?}", line + 2)))?;
            col.push(v);
        }
    }
    let n_samples = columns.first().map_or(0, Vec::len);
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    let samples = Array2::from_shape_vec((channels.len(), n_samples), flat).map_err(|e| Error::format(e.to_string()))?;
    Recording::new(samples, fs, channels, meta)
}

pub fn save_csv(recording: &Recording, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(e.to_string()))?;
    w.write_record(&recording.channels).map_err(|e| Error::format(e.to_string()))?;
    for t in 0..recording.n_samples() {
        let row: Vec<String> = recording.samples.column(t).iter().map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| Error::format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Recording {
        let samples = Array2::from_shape_fn((3, 7), |(c, t)| (c * 10 + t) as f64 * 0.5 - 3.0);
        Recording::new(samples, 200.0, vec!["FP1".into(), "CZ".into(), "OZ".into()], TrialMeta::default()).unwrap()
    }

    #[test]
    fn ncr1_layout_is_exact() {
        let r = sample();
        let mut buf = Vec::new();
        write_ncr1(&r, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"NCR1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 200.0);
        assert_eq!(&buf[20..30], b"FP1\0CZ\0OZ\0");
        assert_eq!(buf.len(), 30 + 3 * 7 * 4);
        let first = f32::from_le_bytes(buf[30..34].try_into().unwrap());
        assert_eq!(first, -3.0);
    }

    #[test]
    fn ncr1_roundtrip_and_bad_magic() {
        let r = sample();
        let mut buf = Vec::new();
        write_ncr1(&r, &mut buf).unwrap();
        let back = read_ncr1(buf.as_slice(), TrialMeta::default()).unwrap();
        assert_eq!(back, r);
        buf[0] = b'X';
        assert!(matches!(read_ncr1(buf.as_slice(), TrialMeta::default()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let r = sample();
        save_csv(&r, &p).unwrap();
        let back = load_csv(&p, 200.0, TrialMeta::default()).unwrap();
        assert_eq!(back, r);
    }
}
