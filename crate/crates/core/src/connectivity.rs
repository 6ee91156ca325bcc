//! Pairwise channel association matrices (Pearson correlation and
//! band-averaged magnitude-squared coherence), channel subsetting and the
//! `NCM1` matrix store.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{BandSpec, Segment, TrialMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Correlation,
    Coherence,
}

impl Metric {
    fn code(self) -> u8 {
        match self {
            Metric::Correlation => 0,
            Metric::Coherence => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Metric::Correlation),
            1 => Ok(Metric::Coherence),
            other => Err(Error::format(format!("unknown metric code {other}"))),
        }
    }
}

/// Symmetric, zero-diagonal association matrix for one window of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    pub weights: DMatrix<f64>,
    pub metric: Metric,
    pub band: Option<BandSpec>,
    pub channels: Vec<String>,
    pub window_index: usize,
    pub meta: TrialMeta,
}

impl ConnectivityMatrix {
    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// Upper-triangle entries (i < j) in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.weights[(i, j)]);
            }
        }
        out
    }
}

/// Pearson correlation between every pair of channels, diagonal zeroed.
pub fn pearson_matrix(segment: &Segment) -> Result<ConnectivityMatrix> {
    let (n, len) = segment.samples.dim();
    if len < 2 {
        return Err(Error::param(format!("correlation needs at least 2 samples per window, got {len}")));
    }
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for (ch, row) in segment.samples.rows().into_iter().enumerate() {
        let mean = row.sum() / len as f64;
        let c: Vec<f64> = row.iter().map(|v| v - mean).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if !ss.is_finite() {
            return Err(Error::data(format!("channel {} contains non-finite samples", segment.channels[ch])));
        }
        if ss <= f64::MIN_POSITIVE {
            return Err(Error::data(format!("channel {} has zero variance in window {}", segment.channels[ch], segment.window_index)));
        }
        norms.push(ss.sqrt());
        centered.push(c);
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            w[(i, j)] = r;
            w[(j, i)] = r;
        }
    }
    Ok(wrap(w, Metric::Correlation, segment))
}

fn wrap(weights: DMatrix<f64>, metric: Metric, segment: &Segment) -> ConnectivityMatrix {
    ConnectivityMatrix {
        weights,
        metric,
        band: segment.band.clone(),
        channels: segment.channels.clone(),
        window_index: segment.window_index,
        meta: segment.meta.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    Hann,
    Rectangular,
}

impl WindowFn {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            // Periodic Hann, as used for spectral estimation.
            WindowFn::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
                .collect(),
            WindowFn::Rectangular => vec![1.0; len],
        }
    }
}

/// Welch estimator settings. `seg_len = None` means one second of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub seg_len: Option<usize>,
    pub overlap: f64,
    pub window: WindowFn,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self { seg_len: None, overlap: 0.5, window: WindowFn::Hann }
    }
}

/// Magnitude-squared coherence averaged over FFT bins with center frequency
/// in `[low_hz, high_hz)` of the segment's band.
pub fn coherence_matrix(segment: &Segment, welch: &WelchConfig) -> Result<ConnectivityMatrix> {
    let band = segment
        .band
        .as_ref()
        .ok_or_else(|| Error::param("coherence needs a band-labelled segment"))?;
    let (n, len) = segment.samples.dim();
    let seg_len = welch.seg_len.unwrap_or(segment.fs.round() as usize);
    if seg_len < 2 {
        return Err(Error::param(format!("Welch sub-segment length {seg_len} too short")));
    }
    if !(0.0..1.0).contains(&welch.overlap) {
        return Err(Error::param(format!("Welch overlap must be in [0, 1), got {}", welch.overlap)));
    }
    let step = ((seg_len as f64) * (1.0 - welch.overlap)).round().max(1.0) as usize;
    let n_sub = if len >= seg_len { (len - seg_len) / step + 1 } else { 0 };
    if n_sub < 2 {
        return Err(Error::param(format!(
            "window of {len} samples yields {n_sub} Welch sub-segments of {seg_len}; at least 2 are required"
        )));
    }
    let bins: Vec<usize> = (0..=seg_len / 2)
        .filter(|&k| {
            let f = k as f64 * segment.fs / seg_len as f64;
            f >= band.low_hz && f < band.high_hz
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::param(format!("no FFT bins of a {seg_len}-point transform fall inside {band}")));
    }

    let taper = welch.window.coefficients(seg_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_len);
    // spectra[ch][sub][bin]
    let mut spectra = vec![vec![vec![Complex64::new(0.0, 0.0); bins.len()]; n_sub]; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];
    for (ch, row) in segment.samples.rows().into_iter().enumerate() {
        let row = row.to_vec();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!("channel {} contains non-finite samples", segment.channels[ch])));
        }
        for sub in 0..n_sub {
            let chunk = &row[sub * step..sub * step + seg_len];
            let mean = chunk.iter().sum::<f64>() / seg_len as f64;
            for (b, (&v, &w)) in buf.iter_mut().zip(chunk.iter().zip(&taper)) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for (slot, &k) in spectra[ch][sub].iter_mut().zip(&bins) {
                *slot = buf[k];
            }
        }
    }

    let auto: Vec<Vec<f64>> = (0..n)
        .map(|ch| {
            (0..bins.len())
                .map(|b| (0..n_sub).map(|s| spectra[ch][s][b].norm_sqr()).sum::<f64>())
                .collect()
        })
        .collect();

    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut total = 0.0;
            for b in 0..bins.len() {
                let cross: Complex64 = (0..n_sub).map(|s| spectra[i][s][b] * spectra[j][s][b].conj()).sum();
                let denom = auto[i][b] * auto[j][b];
                if denom > 0.0 {
                    total += (cross.norm_sqr() / denom).min(1.0);
                }
            }
            let c = total / bins.len() as f64;
            w[(i, j)] = c;
            w[(j, i)] = c;
        }
    }
    Ok(wrap(w, Metric::Coherence, segment))
}

/// Compute the configured metric for one segment.
pub fn connectivity(segment: &Segment, metric: Metric, welch: &WelchConfig) -> Result<ConnectivityMatrix> {
    match metric {
        Metric::Correlation => pearson_matrix(segment),
        Metric::Coherence => coherence_matrix(segment, welch),
    }
}

/// An ordered selection of channels from a parent layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSubset {
    pub names: Vec<String>,
    pub indices: Vec<usize>,
}

/// Placeholder 18-electrode dry-cap layout on a 10-20 montage.
pub const DEFAULT_SUBSET_18: [&str; 18] = [
    "FP1", "FP2", "FZ", "F3", "F4", "F7", "F8", "CZ", "C3", "C4", "T7", "T8", "PZ", "P3", "P4", "P7", "P8", "OZ",
];

impl ChannelSubset {
    pub fn new<S: AsRef<str>>(names: &[S], parent: &[String]) -> Result<Self> {
        let lookup: HashMap<String, usize> =
            parent.iter().enumerate().map(|(i, c)| (c.to_ascii_uppercase(), i)).collect();
        let mut indices = Vec::with_capacity(names.len());
        let mut seen = std::collections::HashSet::new();
        for name in names {
            let key = name.as_ref().to_ascii_uppercase();
            if !seen.insert(key.clone()) {
                return Err(Error::param(format!("duplicate channel {} in subset", name.as_ref())));
            }
            let idx = *lookup
                .get(&key)
                .ok_or_else(|| Error::param(format!("channel {} not in parent layout", name.as_ref())))?;
            indices.push(idx);
        }
        Ok(Self { names: indices.iter().map(|&i| parent[i].clone()).collect(), indices })
    }

    pub fn default_18(parent: &[String]) -> Result<Self> {
        Self::new(&DEFAULT_SUBSET_18, parent)
    }
}

/// Principal submatrix in subset order.
pub fn subset_channels(matrix: &ConnectivityMatrix, subset: &ChannelSubset) -> Result<ConnectivityMatrix> {
    let rebuilt = ChannelSubset::new(&subset.names, &matrix.channels)?;
    let idx = &rebuilt.indices;
    let k = idx.len();
    let weights = DMatrix::from_fn(k, k, |r, c| matrix.weights[(idx[r], idx[c])]);
    Ok(ConnectivityMatrix {
        weights,
        metric: matrix.metric,
        band: matrix.band.clone(),
        channels: rebuilt.names,
        window_index: matrix.window_index,
        meta: matrix.meta.clone(),
    })
}

pub const NCM1_MAGIC: &[u8; 4] = b"NCM1";

/// Write a homogeneous stack of matrices (same N, metric and band) as `NCM1`:
/// magic, u32 N, u8 metric, f64 low, f64 high, u32 n_windows, then dense f32 N×N row-major.
pub fn write_ncm1<W: Write>(matrices: &[ConnectivityMatrix], mut w: W) -> Result<()> {
    let first = matrices.first().ok_or_else(|| Error::param("no matrices to store"))?;
    let n = first.n();
    let (lo, hi) = first.band.as_ref().map_or((0.0, 0.0), |b| (b.low_hz, b.high_hz));
    if matrices.iter().any(|m| m.n() != n || m.metric != first.metric || m.band != first.band) {
        return Err(Error::param("NCM1 stacks must share size, metric and band"));
    }
    w.write_all(NCM1_MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&[first.metric.code()])?;
    w.write_all(&lo.to_le_bytes())?;
    w.write_all(&hi.to_le_bytes())?;
    w.write_all(&(matrices.len() as u32).to_le_bytes())?;
    for m in matrices {
        for i in 0..n {
            for j in 0..n {
                w.write_all(&(m.weights[(i, j)] as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Raw `NCM1` contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Ncm1 {
    pub metric: Metric,
    pub low_hz: f64,
    pub high_hz: f64,
    pub matrices: Vec<DMatrix<f64>>,
}

pub fn read_ncm1<R: Read>(mut r: R) -> Result<Ncm1> {
    let mut head = [0u8; 4 + 4 + 1 + 8 + 8 + 4];
    r.read_exact(&mut head)?;
    if &head[0..4] != NCM1_MAGIC {
        return Err(Error::format("bad magic, expected NCM1"));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let metric = Metric::from_code(head[8])?;
    let low_hz = f64::from_le_bytes(head[9..17].try_into().unwrap());
    let high_hz = f64::from_le_bytes(head[17..25].try_into().unwrap());
    let count = u32::from_le_bytes(head[25..29].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; n * n * 4];
    let mut matrices = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let vals: Vec<f64> = buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        matrices.push(DMatrix::from_row_slice(n, n, &vals));
    }
    Ok(Ncm1 { metric, low_hz, high_hz, matrices })
}

pub fn save_ncm1(matrices: &[ConnectivityMatrix], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ncm1(matrices, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_ncm1(path: &Path) -> Result<Ncm1> {
    read_ncm1(BufReader::new(File::open(path)?)).map_err(|e| e.context(&path.display().to_string()))
}

/// CSV export: one row per window, `window,` then the upper triangle.
pub fn write_upper_csv<W: Write>(matrices: &[ConnectivityMatrix], mut w: W) -> Result<()> {
    let Some(first) = matrices.first() else { return Ok(()) };
    let n = first.n();
    let mut header = vec!["window".to_string()];
    for i in 0..n {
        for j in i + 1..n {
            header.push(format!("{}-{}", first.channels[i], first.channels[j]));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for m in matrices {
        let vals: Vec<String> = m.upper_triangle().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", m.window_index, vals.join(","))?;
    }
    Ok(())
}
