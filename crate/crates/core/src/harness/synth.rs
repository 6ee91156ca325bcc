//! Synthetic datasets with planted class-specific connectivity.
//!
//! Each trial mixes `N` shared band-limited latent sources through a
//! class-specific matrix `A_c = I + strength · (B_c + jitter · B_s)` and adds
//! white sensor noise. The secondary modality is a noisy linear readout of the
//! one-hot class, one row per EEG window.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, Protocol, TrialEntry};
use crate::connectivity::DEFAULT_SUBSET_18;
use crate::error::{Error, Result};
use crate::signal::{design_bandpass, io::save_ncr1, Recording, TrialMeta};
use crate::table::{self, FeatureRow, FeatureTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub protocol: Protocol,
    pub n_subjects: u32,
    pub n_sessions: u32,
    pub n_classes: usize,
    pub n_trials_per_class: usize,
    pub n_channels: usize,
    pub fs: f64,
    pub duration_sec: f64,
    /// Planted connectivity strength; `0` makes every class identical.
    pub strength: f64,
    /// Sensor noise standard deviation relative to unit-variance sources.
    pub noise: f64,
    /// Per-subject deviation of the mixing, as a fraction of the class term.
    pub subject_jitter: f64,
    /// `0` disables the secondary modality.
    pub secondary_dim: usize,
    pub secondary_noise: f64,
    /// Secondary rows are produced per window of this length.
    pub window_sec: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            protocol: Protocol::Seedv5,
            n_subjects: 3,
            n_sessions: 1,
            n_classes: 5,
            n_trials_per_class: 3,
            n_channels: 18,
            fs: 200.0,
            duration_sec: 60.0,
            strength: 1.0,
            noise: 0.5,
            subject_jitter: 0.2,
            secondary_dim: 33,
            secondary_noise: 2.0,
            window_sec: 4.0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let per_group = self.protocol.trials_per_group();
        if self.n_classes < 2 || self.n_classes * self.n_trials_per_class != per_group {
            return Err(Error::param(format!(
                "{} classes × {} trials does not give the {per_group} trials {} requires",
                self.n_classes, self.n_trials_per_class, self.protocol
            )));
        }
        if self.n_subjects == 0 || self.n_sessions == 0 || self.n_channels < 2 {
            return Err(Error::param("need at least one subject, one session and two channels"));
        }
        if matches!(self.protocol, Protocol::DeapArousal | Protocol::DeapValence) && self.n_sessions != 1 {
            return Err(Error::param("DEAP-style data has one session per subject"));
        }
        if !(self.fs > 0.0 && self.duration_sec > 0.0 && self.window_sec > 0.0) {
            return Err(Error::param("rates and durations must be positive"));
        }
        if !(self.strength >= 0.0 && self.noise >= 0.0 && self.secondary_noise >= 0.0) {
            return Err(Error::param("strength and noise levels must be non-negative"));
        }
        Ok(())
    }

    pub fn channel_names(&self) -> Vec<String> {
        if self.n_channels == DEFAULT_SUBSET_18.len() {
            DEFAULT_SUBSET_18.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.n_channels).map(|i| format!("CH{:02}", i + 1)).collect()
        }
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * Distribution::<f64>::sample(&StandardNormal, rng))
}

/// Stream id for a trial so that each trial's samples are independent of generation order.
fn trial_stream(subject: u32, session: u32, trial: u32) -> u64 {
    (u64::from(subject) << 40) | (u64::from(session) << 20) | u64::from(trial)
}

/// Write `eeg/*.ncr1`, optional `secondary/*.nft` and `manifest.toml` under `out_dir`.
pub fn synth_generate(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let n = spec.n_channels;
    let samples = (spec.duration_sec * spec.fs).round() as usize;
    let windows = (spec.duration_sec / spec.window_sec).floor() as usize;
    let channels = spec.channel_names();
    let source_filter = design_bandpass(1.0, (0.45 * spec.fs).min(45.0), spec.fs, 4)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let class_mix: Vec<DMatrix<f64>> = (0..spec.n_classes).map(|_| gaussian_matrix(&mut rng, n, n, scale)).collect();
    let subject_mix: Vec<DMatrix<f64>> =
        (0..spec.n_subjects).map(|_| gaussian_matrix(&mut rng, n, n, scale)).collect();
    let readout = gaussian_matrix(&mut rng, spec.secondary_dim, spec.n_classes, 1.0);

    std::fs::create_dir_all(out_dir.join("eeg"))?;
    if spec.secondary_dim > 0 {
        std::fs::create_dir_all(out_dir.join("secondary"))?;
    }
    let mut trials = Vec::new();
    for subject in 1..=spec.n_subjects {
        for session in 1..=spec.n_sessions {
            for trial in 1..=spec.protocol.trials_per_group() as u32 {
                let label = (trial as usize - 1) % spec.n_classes;
                let mut trng = ChaCha8Rng::seed_from_u64(seed);
                trng.set_stream(trial_stream(subject, session, trial));

                let mixing = DMatrix::identity(n, n)
                    + (&class_mix[label] + &subject_mix[subject as usize - 1] * spec.subject_jitter) * spec.strength;
                let mut sources = DMatrix::zeros(n, samples);
                for i in 0..n {
                    let white: Vec<f64> = (0..samples).map(|_| StandardNormal.sample(&mut trng)).collect();
                    let band = source_filter.filtfilt(&white);
                    let sd = (band.iter().map(|v| v * v).sum::<f64>() / samples as f64).sqrt().max(f64::MIN_POSITIVE);
                    for (t, v) in band.iter().enumerate() {
                        sources[(i, t)] = v / sd;
                    }
                }
                let mixed = &mixing * sources + gaussian_matrix(&mut trng, n, samples, spec.noise);
                let data = Array2::from_shape_fn((n, samples), |(i, t)| 10.0 * mixed[(i, t)]);
                let meta = TrialMeta { subject_id: subject, session_id: session, trial_id: trial, label: Some(label) };
                let rec = Recording::new(data, spec.fs, channels.clone(), meta.clone())?;
                let stem = format!("s{subject:02}_e{session}_t{trial:02}");
                let eeg = PathBuf::from("eeg").join(format!("{stem}.ncr1"));
                save_ncr1(&rec, &out_dir.join(&eeg))?;

                let secondary = if spec.secondary_dim > 0 {
                    let mut t = FeatureTable::new(spec.secondary_dim);
                    for w in 0..windows {
                        let noise = DVector::from_fn(spec.secondary_dim, |_, _| {
                            spec.secondary_noise * Distribution::<f64>::sample(&StandardNormal, &mut trng)
                        });
                        let values = readout.column(label) + noise;
                        t.push(FeatureRow { meta: meta.clone(), window_index: w, values: values.iter().copied().collect() })?;
                    }
                    let path = PathBuf::from("secondary").join(format!("{stem}.nft"));
                    table::save(&t, &out_dir.join(&path))?;
                    Some(path)
                } else {
                    None
                };
                trials.push(TrialEntry { subject, session, trial, label, eeg, secondary });
            }
        }
    }
    let manifest = DatasetManifest {
        protocol: spec.protocol,
        labels: (0..spec.n_classes).map(|c| format!("class{c}")).collect(),
        channel_layout: format!("synthetic-{n}"),
        fs: None,
        trials,
        root: out_dir.to_path_buf(),
    };
    manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::io::load_ncr1;

    fn small() -> SynthSpec {
        SynthSpec { n_subjects: 1, duration_sec: 8.0, secondary_dim: 4, ..Default::default() }
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        synth_generate(&small(), 11, a.path()).unwrap();
        synth_generate(&small(), 11, b.path()).unwrap();
        for rel in ["manifest.toml", "eeg/s01_e1_t07.ncr1", "secondary/s01_e1_t07.nft"] {
            assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
        }
    }

    #[test]
    fn manifest_reloads_and_recordings_match_spec() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_generate(&small(), 1, dir.path()).unwrap();
        let back = DatasetManifest::load(&dir.path().join("manifest.toml")).unwrap();
        assert_eq!(back.trials, m.trials);
        assert_eq!(m.trials.len(), 15);
        let rec = load_ncr1(&back.resolve(&back.trials[0].eeg), back.trials[0].meta()).unwrap();
        assert_eq!(rec.samples.dim(), (18, 1600));
        assert_eq!(rec.channels[0], "FP1");
        let sec = table::load(&back.resolve(back.trials[0].secondary.as_ref().unwrap())).unwrap();
        assert_eq!((sec.len(), sec.dim), (2, 4));
    }

    #[test]
    fn trial_count_must_fit_protocol() {
        let spec = SynthSpec { n_trials_per_class: 2, ..small() };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(synth_generate(&spec, 0, dir.path()), Err(Error::Parameter(_))));
    }
}
