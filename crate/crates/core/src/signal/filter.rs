//! Butterworth IIR design as second-order sections, and zero-phase
//! (forward-backward) application.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }

    /// Steady-state transposed direct form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let gain = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * gain;
        let z1 = self.b[1] - self.a[1] * gain + z2;
        [z1, z2]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoeffs {
    pub sections: Vec<Biquad>,
}

impl FilterCoeffs {
    /// Complex frequency response at `freq_hz` for sampling rate `fs`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        self.response(freq_hz, fs).norm()
    }

    fn scale(&mut self, gain: f64) {
        let per_section = gain.abs().powf(1.0 / self.sections.len() as f64);
        for s in &mut self.sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        if gain < 0.0 {
            for b in &mut self.sections[0].b {
                *b = -*b;
            }
        }
    }

    /// Initial states (per section) that put the cascade in steady state for a unit step.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let zi = s.step_state();
                let out = [zi[0] * scale, zi[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Causal filtering (transposed direct form II) with optional per-section initial state.
    pub fn filter_in_place(&self, x: &mut [f64], initial: Option<&[[f64; 2]]>) {
        for (k, s) in self.sections.iter().enumerate() {
            let [mut z1, mut z2] = initial.map_or([0.0, 0.0], |zi| zi[k]);
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * y + z2;
                z2 = s.b[2] * input - s.a[2] * y;
                *v = y;
            }
        }
    }

    /// Forward-backward filtering with odd-extension padding and steady-state
    /// initial conditions. The result has zero phase and squared magnitude response.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 || self.sections.is_empty() {
            return x.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let unit = self.step_states();
        let scaled = |v: f64| unit.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let zi = scaled(ext[0]);
        self.filter_in_place(&mut ext, Some(&zi));
        ext.reverse();
        let zi = scaled(ext[0]);
        self.filter_in_place(&mut ext, Some(&zi));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Left-half-plane Butterworth prototype poles of order `n`, unit cutoff.
fn prototype_poles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = Complex64::new(2.0 * fs, 0.0);
    (k + s) / (k - s)
}

fn prewarp(f_hz: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f_hz / fs).tan()
}

/// Group z-plane poles into real-coefficient denominators: conjugate pairs first,
/// then remaining real poles two at a time (a lone real pole yields a first-order section).
fn pole_denominators(poles: &[Complex64]) -> Vec<[f64; 3]> {
    const IMAG_TOL: f64 = 1e-12;
    let mut dens = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im > IMAG_TOL {
            dens.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IMAG_TOL {
            reals.push(p.re);
        }
    }
    for pair in reals.chunks(2) {
        match pair {
            [r1, r2] => dens.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => dens.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    dens
}

fn check_edges(low_hz: f64, high_hz: f64, fs: f64) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::param(format!("sampling rate must be positive, got {fs}")));
    }
    if !(low_hz.is_finite() && high_hz.is_finite() && 0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0)
    {
        return Err(Error::param(format!(
            "band edges must satisfy 0 < low < high < fs/2, got ({low_hz}, {high_hz}) at fs={fs}"
        )));
    }
    Ok(())
}

/// Butterworth bandpass of total order `order` (even, ≥ 2), i.e. a lowpass
/// prototype of order `order / 2`, as biquads with unity gain at the geometric
/// band center.
pub fn design_bandpass(low_hz: f64, high_hz: f64, fs: f64, order: usize) -> Result<FilterCoeffs> {
    check_edges(low_hz, high_hz, fs)?;
    if order < 2 || !order.is_multiple_of(2) {
        return Err(Error::param(format!("bandpass order must be even and >= 2, got {order}")));
    }
    let n = order / 2;
    let wl = prewarp(low_hz, fs);
    let wh = prewarp(high_hz, fs);
    let w0 = (wl * wh).sqrt();
    let bw = wh - wl;

    let mut z_poles = Vec::with_capacity(2 * n);
    for p in prototype_poles(n) {
        let half = p * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        z_poles.push(bilinear(half + disc, fs));
        z_poles.push(bilinear(half - disc, fs));
    }
    let sections = pole_denominators(&z_poles)
        .into_iter()
        .map(|a| Biquad { b: [1.0, 0.0, -1.0], a })
        .collect::<Vec<_>>();
    debug_assert_eq!(sections.len(), n);

    let mut coeffs = FilterCoeffs { sections };
    let center = fs / PI * (w0 / (2.0 * fs)).atan();
    let gain = coeffs.magnitude(center, fs);
    coeffs.scale(1.0 / gain);
    Ok(coeffs)
}

/// Butterworth lowpass of order `order` (≥ 1) with unity DC gain.
pub fn design_lowpass(cutoff_hz: f64, fs: f64, order: usize) -> Result<FilterCoeffs> {
    if !(fs.is_finite() && fs > 0.0 && cutoff_hz.is_finite() && 0.0 < cutoff_hz && cutoff_hz < fs / 2.0) {
        return Err(Error::param(format!(
            "lowpass cutoff must satisfy 0 < fc < fs/2, got {cutoff_hz} at fs={fs}"
        )));
    }
    if order == 0 {
        return Err(Error::param("lowpass order must be >= 1"));
    }
    let wc = prewarp(cutoff_hz, fs);
    let z_poles: Vec<_> = prototype_poles(order).into_iter().map(|p| bilinear(p * wc, fs)).collect();
    let sections = pole_denominators(&z_poles)
        .into_iter()
        .map(|a| {
            let b = if a[2] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
            Biquad { b, a }
        })
        .collect::<Vec<_>>();
    let mut coeffs = FilterCoeffs { sections };
    let gain = coeffs.magnitude(0.0, fs);
    coeffs.scale(1.0 / gain);
    Ok(coeffs)
}
