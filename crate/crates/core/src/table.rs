//! Feature tables: one row per window with trial metadata.
//!
//! CSV: `subject,session,trial,window,label,f_0,...,f_{d-1}` (empty label when unknown).
//!
//! `NFT1` (little-endian): `"NFT1" | u32 n_rows | u32 dim`, then per row
//! `u32 subject | u32 session | u32 trial | u32 window | i32 label (-1 = none) | dim × f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::TrialMeta;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub meta: TrialMeta,
    pub window_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub dim: usize,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.dim {
            return Err(Error::data(format!("row has {} values, table dim is {}", row.values.len(), self.dim)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub const NFT1_MAGIC: &[u8; 4] = b"NFT1";

pub fn write_nft1<W: Write>(table: &FeatureTable, mut w: W) -> Result<()> {
    w.write_all(NFT1_MAGIC)?;
    w.write_all(&(table.rows.len() as u32).to_le_bytes())?;
    w.write_all(&(table.dim as u32).to_le_bytes())?;
    for r in &table.rows {
        w.write_all(&r.meta.subject_id.to_le_bytes())?;
        w.write_all(&r.meta.session_id.to_le_bytes())?;
        w.write_all(&r.meta.trial_id.to_le_bytes())?;
        w.write_all(&(r.window_index as u32).to_le_bytes())?;
        let label = r.meta.label.map_or(-1i32, |l| l as i32);
        w.write_all(&label.to_le_bytes())?;
        for &v in &r.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_nft1<R: Read>(mut r: R) -> Result<FeatureTable> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if &head[0..4] != NFT1_MAGIC {
        return Err(Error::format("bad magic, expected NFT1"));
    }
    let n_rows = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut table = FeatureTable::new(dim);
    let mut meta = [0u8; 20];
    let mut vals = vec![0u8; dim * 4];
    for _ in 0..n_rows {
        r.read_exact(&mut meta)?;
        r.read_exact(&mut vals)?;
        let u = |k: usize| u32::from_le_bytes(meta[4 * k..4 * k + 4].try_into().unwrap());
        let label = i32::from_le_bytes(meta[16..20].try_into().unwrap());
        table.rows.push(FeatureRow {
            meta: TrialMeta {
                subject_id: u(0),
                session_id: u(1),
                trial_id: u(2),
                label: (label >= 0).then_some(label as usize),
            },
            window_index: u(3) as usize,
            values: vals.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        });
    }
    Ok(table)
}

pub fn write_csv<W: Write>(table: &FeatureTable, mut w: W) -> Result<()> {
    let mut header = vec!["subject".to_string(), "session".into(), "trial".into(), "window".into(), "label".into()];
    header.extend((0..table.dim).map(|k| format!("f_{k}")));
    writeln!(w, "{}", header.join(","))?;
    for r in &table.rows {
        let label = r.meta.label.map(|l| l.to_string()).unwrap_or_default();
        let vals: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.meta.subject_id,
            r.meta.session_id,
            r.meta.trial_id,
            r.window_index,
            label,
            vals.join(",")
        )?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<FeatureTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| Error::format(e.to_string()))?.clone();
    if headers.len() < 5 {
        return Err(Error::format("feature CSV needs subject,session,trial,window,label columns"));
    }
    let dim = headers.len() - 5;
    let mut table = FeatureTable::new(dim);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(e.to_string()))?;
        let bad = |f: &str| Error::format(format!("feature CSV line {}: cannot parse {f:?}", line + 2));
        let int = |k: usize| rec[k].trim().parse::<u32>().map_err(|_| bad(&rec[k]));
        let label = match rec[4].trim() {
            "" => None,
            s => Some(s.parse::<usize>().map_err(|_| bad(s))?),
        };
        let values = (5..rec.len())
            .map(|k| rec[k].trim().parse::<f64>().map_err(|_| bad(&rec[k])))
            .collect::<Result<Vec<_>>>()?;
        table.push(FeatureRow {
            meta: TrialMeta { subject_id: int(0)?, session_id: int(1)?, trial_id: int(2)?, label },
            window_index: int(3)? as usize,
            values,
        })?;
    }
    Ok(table)
}

/// Load by extension: `.csv` as CSV, anything else as `NFT1`.
pub fn load(path: &Path) -> Result<FeatureTable> {
    let file = BufReader::new(File::open(path).map_err(|e| Error::from(e).context(&path.display().to_string()))?);
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let out = if is_csv { read_csv(file) } else { read_nft1(file) };
    out.map_err(|e| e.context(&path.display().to_string()))
}

pub fn save(table: &FeatureTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(table, &mut w)?;
    } else {
        write_nft1(table, &mut w)?;
    }
    w.flush()?;
    Ok(())
}
