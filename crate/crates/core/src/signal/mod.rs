//! Recording ingestion, preprocessing, band decomposition and windowing.

mod filter;
pub mod io;

use std::collections::HashSet;
use std::fmt;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{design_bandpass, design_lowpass, Biquad, FilterCoeffs};

/// Identifiers carried from a trial down to every window and feature row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialMeta {
    pub subject_id: u32,
    pub session_id: u32,
    pub trial_id: u32,
    /// Class index into the dataset label set, if known.
    pub label: Option<usize>,
}

/// A frequency band used for decomposition and coherence averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, low_hz: f64, high_hz: f64) -> Self {
        Self { name: name.into(), low_hz, high_hz }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < fs / 2.0) {
            return Err(Error::param(format!(
                "band {} [{}, {}] Hz invalid for fs = {fs}",
                self.name, self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }

    /// δ, θ, α, β, γ.
    pub fn five_bands() -> Vec<BandSpec> {
        vec![
            BandSpec::new("delta", 1.0, 4.0),
            BandSpec::new("theta", 4.0, 8.0),
            BandSpec::new("alpha", 8.0, 14.0),
            BandSpec::new("beta", 14.0, 31.0),
            BandSpec::new("gamma", 31.0, 50.0),
        ]
    }

    /// θ, α, β, γ (no δ), as used for DEAP.
    pub fn four_bands() -> Vec<BandSpec> {
        Self::five_bands().into_iter().skip(1).collect()
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}-{} Hz]", self.name, self.low_hz, self.high_hz)
    }
}

/// A multichannel recording, channel-major (`channels × samples`), in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub samples: Array2<f64>,
    pub fs: f64,
    pub channels: Vec<String>,
    pub meta: TrialMeta,
    /// Set once the recording has been band-filtered.
    pub band: Option<BandSpec>,
}

impl Recording {
    pub fn new(samples: Array2<f64>, fs: f64, channels: Vec<String>, meta: TrialMeta) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::param(format!("sampling rate must be positive, got {fs}")));
        }
        if channels.len() != samples.nrows() {
            return Err(Error::data(format!(
                "{} channel labels for {} channel rows",
                channels.len(),
                samples.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for c in &channels {
            if !seen.insert(c.as_str()) {
                return Err(Error::data(format!("duplicate channel label {c}")));
            }
        }
        Ok(Self { samples, fs, channels, meta, band: None })
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_sec(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    fn with_samples(&self, samples: Array2<f64>, fs: f64) -> Recording {
        Recording {
            samples,
            fs,
            channels: self.channels.clone(),
            meta: self.meta.clone(),
            band: self.band.clone(),
        }
    }
}

/// One fixed-length window of a (usually band-filtered) recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Array2<f64>,
    pub fs: f64,
    pub channels: Vec<String>,
    pub band: Option<BandSpec>,
    pub window_index: usize,
    pub meta: TrialMeta,
}

/// Per-channel mean removal (baseline correction).
pub fn remove_mean(recording: &Recording) -> Recording {
    let mut samples = recording.samples.clone();
    for mut row in samples.rows_mut() {
        let mean = row.mean().unwrap_or(0.0);
        row.mapv_inplace(|v| v - mean);
    }
    recording.with_samples(samples, recording.fs)
}

fn check_finite(recording: &Recording) -> Result<()> {
    for (ch, row) in recording.samples.axis_iter(Axis(0)).enumerate() {
        if let Some(t) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite sample in channel {} at index {t}",
                recording.channels[ch]
            )));
        }
    }
    Ok(())
}

/// Forward-backward filtering of every channel.
pub fn apply_filter_zero_phase(recording: &Recording, coeffs: &FilterCoeffs) -> Result<Recording> {
    if recording.n_samples() == 0 || recording.n_channels() == 0 {
        return Err(Error::data("cannot filter an empty recording"));
    }
    check_finite(recording)?;
    let mut out = Array2::zeros(recording.samples.raw_dim());
    for (src, mut dst) in recording.samples.rows().into_iter().zip(out.rows_mut()) {
        let filtered = coeffs.filtfilt(&src.to_vec());
        dst.assign(&ndarray::ArrayView1::from(&filtered));
    }
    Ok(recording.with_samples(out, recording.fs))
}

/// Anti-alias lowpass at 80% of the target Nyquist, then decimate by the integer ratio.
pub fn downsample(recording: &Recording, target_fs: f64) -> Result<Recording> {
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::param(format!("target rate must be positive, got {target_fs}")));
    }
    let ratio = recording.fs / target_fs;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::param(format!(
            "downsampling {} Hz to {target_fs} Hz needs an integer ratio",
            recording.fs
        )));
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(recording.clone());
    }
    let lowpass = design_lowpass(0.8 * target_fs / 2.0, recording.fs, 8)?;
    let filtered = apply_filter_zero_phase(recording, &lowpass)?;
    let decimated = filtered.samples.slice(s![.., ..;factor]).to_owned();
    Ok(recording.with_samples(decimated, target_fs))
}

/// Split into consecutive nonoverlapping windows of `round(window_sec · fs)`
/// samples; a trailing partial window is dropped.
pub fn segment(recording: &Recording, window_sec: f64) -> Result<Vec<Segment>> {
    let len = (window_sec * recording.fs).round();
    if !(len >= 1.0) {
        return Err(Error::param(format!("window of {window_sec} s is shorter than one sample")));
    }
    let len = len as usize;
    let count = recording.n_samples() / len;
    Ok((0..count)
        .map(|w| Segment {
            samples: recording.samples.slice(s![.., w * len..(w + 1) * len]).to_owned(),
            fs: recording.fs,
            channels: recording.channels.clone(),
            band: recording.band.clone(),
            window_index: w,
            meta: recording.meta.clone(),
        })
        .collect())
}

/// One zero-phase filtered copy of the recording per band, in band order.
pub fn band_decompose(recording: &Recording, bands: &[BandSpec], order: usize) -> Result<Vec<(BandSpec, Recording)>> {
    bands
        .iter()
        .map(|band| {
            band.validate(recording.fs)?;
            let coeffs = design_bandpass(band.low_hz, band.high_hz, recording.fs, order)?;
            let mut filtered = apply_filter_zero_phase(recording, &coeffs)?;
            filtered.band = Some(band.clone());
            Ok((band.clone(), filtered))
        })
        .collect()
}

/// Broadband preprocessing applied before band decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    /// Downsample to this rate when set and different from the input rate.
    pub target_fs: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { low_hz: 1.0, high_hz: 50.0, order: 4, target_fs: Some(200.0) }
    }
}

/// Mean removal, broadband bandpass, then downsampling.
pub fn preprocess(recording: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    let centered = remove_mean(recording);
    let coeffs = design_bandpass(cfg.low_hz, cfg.high_hz, recording.fs, cfg.order)?;
    let filtered = apply_filter_zero_phase(&centered, &coeffs)?;
    match cfg.target_fs {
        Some(target) if (target - recording.fs).abs() > f64::EPSILON => downsample(&filtered, target),
        _ => Ok(filtered),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use ndarray::Array1;
    use proptest::prelude::*;

    use super::*;

    fn rec(rows: Vec<Vec<f64>>, fs: f64) -> Recording {
        let n = rows.len();
        let t = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let samples = Array2::from_shape_vec((n, t), flat).unwrap();
        let channels = (0..n).map(|i| format!("C{i}")).collect();
        Recording::new(samples, fs, channels, TrialMeta::default()).unwrap()
    }

    fn sine(freq: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs + phase).sin()).collect()
    }

    /// Least-squares fit of a·sin + b·cos at a known frequency over `range`.
    fn fit_sinusoid(x: &[f64], freq: f64, fs: f64, range: std::ops::Range<usize>) -> (f64, f64) {
        let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in range {
            let w = 2.0 * PI * freq * i as f64 / fs;
            let (s, c) = w.sin_cos();
            ss += s * s;
            cc += c * c;
            sc += s * c;
            xs += x[i] * s;
            xc += x[i] * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs * cc - xc * sc) / det;
        let b = (xc * ss - xs * sc) / det;
        ((a * a + b * b).sqrt(), b.atan2(a))
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn passband_sinusoid_keeps_amplitude_and_phase() {
        let fs = 200.0;
        let x = sine(10.0, fs, 4000, 0.3);
        let r = rec(vec![x], fs);
        let c = design_bandpass(8.0, 14.0, fs, 4).unwrap();
        let y = apply_filter_zero_phase(&r, &c).unwrap();
        let y = y.samples.row(0).to_vec();
        let (amp, phase) = fit_sinusoid(&y, 10.0, fs, 400..3600);
        // Zero-phase cascade gain at 10 Hz is |H(10)|^2.
        assert!((amp - 1.0).abs() < 0.05, "amplitude {amp}");
        let shift_samples = (phase - 0.3).abs() / (2.0 * PI * 10.0 / fs);
        assert!(shift_samples < 1.0, "phase shift {shift_samples} samples");
    }

    #[test]
    fn stopband_sinusoid_is_removed() {
        let fs = 200.0;
        let x = sine(45.0, fs, 4000, 0.0);
        let r = rec(vec![x.clone()], fs);
        let c = design_bandpass(1.0, 4.0, fs, 4).unwrap();
        let y = apply_filter_zero_phase(&r, &c).unwrap();
        // Narrowband edge ringing decays within a couple of seconds.
        let out = rms(&y.samples.row(0).as_slice().unwrap()[400..3600]);
        assert!(out < 0.05 * rms(&x), "{out}");
    }

    #[test]
    fn zero_in_zero_out() {
        let r = rec(vec![vec![0.0; 500]; 2], 200.0);
        let c = design_bandpass(1.0, 50.0, 200.0, 4).unwrap();
        let y = apply_filter_zero_phase(&r, &c).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nan_input_is_a_data_error() {
        let mut x = vec![0.0; 100];
        x[17] = f64::NAN;
        let r = rec(vec![x], 200.0);
        let c = design_bandpass(1.0, 50.0, 200.0, 4).unwrap();
        assert!(matches!(apply_filter_zero_phase(&r, &c), Err(Error::Data(_))));
    }

    #[test]
    fn cross_correlation_peaks_at_lag_zero() {
        let fs = 200.0;
        for (freq, lo, hi) in [(10.0, 8.0, 14.0), (6.0, 4.0, 8.0), (20.0, 14.0, 31.0), (40.0, 31.0, 50.0)] {
            let x = sine(freq, fs, 2000, 0.7);
            let r = rec(vec![x.clone()], fs);
            let c = design_bandpass(lo, hi, fs, 4).unwrap();
            let y = apply_filter_zero_phase(&r, &c).unwrap().samples.row(0).to_vec();
            let xcorr = |lag: i64| -> f64 {
                (300..1700).map(|i| x[i] * y[(i as i64 + lag) as usize]).sum()
            };
            let best = (-2i64..=2).max_by(|a, b| xcorr(*a).partial_cmp(&xcorr(*b)).unwrap()).unwrap();
            assert_eq!(best, 0, "{freq} Hz");
        }
    }

    #[test]
    fn downsample_1000_to_200() {
        let r = rec(vec![sine(5.0, 1000.0, 10_000, 0.0), sine(12.0, 1000.0, 10_000, 1.0)], 1000.0);
        let d = downsample(&r, 200.0).unwrap();
        assert_eq!(d.n_samples(), 2000);
        assert_eq!(d.fs, 200.0);
        // 5 Hz content survives the anti-alias filter.
        let (amp, _) = fit_sinusoid(d.samples.row(0).as_slice().unwrap(), 5.0, 200.0, 100..1900);
        assert!((amp - 1.0).abs() < 0.01, "{amp}");
    }

    #[test]
    fn downsample_identity_and_bad_ratio() {
        let r = rec(vec![sine(5.0, 200.0, 400, 0.0)], 200.0);
        assert_eq!(downsample(&r, 200.0).unwrap(), r);
        assert!(matches!(downsample(&r, 150.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn segmentation_counts() {
        let r = rec(vec![vec![1.0; 200 * 130]], 200.0);
        let segs = segment(&r, 4.0).unwrap();
        assert_eq!(segs.len(), 32);
        assert!(segs.iter().all(|s| s.samples.ncols() == 800));
        assert_eq!(segs.iter().map(|s| s.window_index).collect::<Vec<_>>(), (0..32).collect::<Vec<_>>());

        let r = rec(vec![vec![1.0; 128 * 60]], 128.0);
        assert_eq!(segment(&r, 2.0).unwrap().len(), 30);

        let r = rec(vec![vec![1.0; 600]], 200.0);
        assert!(segment(&r, 4.0).unwrap().is_empty());
    }

    #[test]
    fn band_decomposition_shapes() {
        let r = rec(vec![sine(10.0, 200.0, 1000, 0.0)], 200.0);
        let out = band_decompose(&r, &BandSpec::five_bands(), 4).unwrap();
        assert_eq!(out.len(), 5);
        let names: Vec<_> = out.iter().map(|(b, _)| b.name.as_str()).collect();
        assert_eq!(names, ["delta", "theta", "alpha", "beta", "gamma"]);
        assert!(out.iter().all(|(b, r)| r.band.as_ref() == Some(b)));

        let r = rec(vec![sine(10.0, 128.0, 1000, 0.0)], 128.0);
        assert_eq!(band_decompose(&r, &BandSpec::four_bands(), 4).unwrap().len(), 4);
        assert!(band_decompose(&r, &[], 4).unwrap().is_empty());
        assert!(band_decompose(&r, &[BandSpec::new("bad", 31.0, 70.0)], 4).is_err());
    }

    #[test]
    fn recording_invariants_enforced() {
        let samples = Array2::zeros((2, 10));
        assert!(Recording::new(samples.clone(), 200.0, vec!["A".into(), "A".into()], TrialMeta::default()).is_err());
        assert!(Recording::new(samples.clone(), 0.0, vec!["A".into(), "B".into()], TrialMeta::default()).is_err());
        assert!(Recording::new(samples, 200.0, vec!["A".into()], TrialMeta::default()).is_err());
    }

    #[test]
    fn mean_removal() {
        let r = rec(vec![vec![1.0, 2.0, 3.0], vec![-4.0, 0.0, 1.0]], 10.0);
        let c = remove_mean(&r);
        for row in c.samples.rows() {
            assert!(row.sum().abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn filtering_is_linear(
            x in prop::collection::vec(-100.0f64..100.0, 300),
            y in prop::collection::vec(-100.0f64..100.0, 300),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let c = design_bandpass(4.0, 8.0, 200.0, 4).unwrap();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = c.filtfilt(&combo);
            let fx = c.filtfilt(&x);
            let fy = c.filtfilt(&y);
            let scale = lhs.iter().chain(&fx).chain(&fy).fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..lhs.len() {
                let rhs = a * fx[i] + b * fy[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn segments_partition_the_prefix(len in 1usize..3000, win in 0.5f64..6.0) {
            let data = Array1::from_iter((0..len).map(|i| i as f64)).insert_axis(Axis(0));
            let r = Recording::new(data.to_owned(), 100.0, vec!["X".into()], TrialMeta::default()).unwrap();
            let segs = segment(&r, win).unwrap();
            let w = (win * 100.0).round() as usize;
            prop_assert_eq!(segs.len(), len / w);
            let joined: Vec<f64> = segs.iter().flat_map(|s| s.samples.row(0).to_vec()).collect();
            let expect: Vec<f64> = (0..(len / w) * w).map(|i| i as f64).collect();
            prop_assert_eq!(joined, expect);
        }
    }
}
