//! Temporal feature smoothing with a scalar random-walk linear dynamical
//! system per feature dimension:
//!
//! ```text
//! x_t = x_{t-1} + w_t,   w_t ~ N(0, q)
//! y_t = x_t + v_t,       v_t ~ N(0, r)
//! ```
//!
//! `q` and `r` are fit by EM on the sequence itself; the output is the
//! Rauch–Tung–Striebel smoothed mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdsParams {
    pub transition: f64,
    pub observation: f64,
    pub process_var: f64,
    pub observation_var: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdsConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LdsConfig {
    fn default() -> Self {
        Self { max_iter: 20, tol: 1e-6 }
    }
}

struct Smoothed {
    mean: Vec<f64>,
    var: Vec<f64>,
    /// Cov(x_t, x_{t-1} | y_{1..T}) for t ≥ 1; index 0 unused.
    lag_cov: Vec<f64>,
}

/// Kalman filter followed by the RTS backward pass (transition = observation = 1).
fn kalman_rts(y: &[f64], p: &LdsParams) -> Smoothed {
    let n = y.len();
    let mut pred_mean = vec![0.0; n];
    let mut pred_var = vec![0.0; n];
    let mut filt_mean = vec![0.0; n];
    let mut filt_var = vec![0.0; n];
    for t in 0..n {
        let (m, v) = if t == 0 { (p.init_mean, p.init_var) } else { (filt_mean[t - 1], filt_var[t - 1] + p.process_var) };
        pred_mean[t] = m;
        pred_var[t] = v;
        let gain = v / (v + p.observation_var);
        filt_mean[t] = m + gain * (y[t] - m);
        filt_var[t] = (1.0 - gain) * v;
    }
    let mut mean = filt_mean.clone();
    let mut var = filt_var.clone();
    let mut lag_cov = vec![0.0; n];
    for t in (0..n.saturating_sub(1)).rev() {
        let j = filt_var[t] / pred_var[t + 1];
        mean[t] = filt_mean[t] + j * (mean[t + 1] - pred_mean[t + 1]);
        var[t] = filt_var[t] + j * j * (var[t + 1] - pred_var[t + 1]);
        lag_cov[t + 1] = j * var[t + 1];
    }
    Smoothed { mean, var, lag_cov }
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
}

/// Fit `q` and `r` by EM, starting from half the sample variance each.
pub fn fit_lds(y: &[f64], cfg: &LdsConfig) -> Result<LdsParams> {
    if y.is_empty() {
        return Err(Error::data("cannot fit an LDS to an empty sequence"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value in sequence"));
    }
    let var = variance(y);
    let floor = (var * 1e-12).max(f64::MIN_POSITIVE);
    let mut p = LdsParams {
        transition: 1.0,
        observation: 1.0,
        process_var: (var / 2.0).max(floor),
        observation_var: (var / 2.0).max(floor),
        init_mean: y[0],
        init_var: var.max(floor),
    };
    let n = y.len();
    if n < 2 || var == 0.0 {
        return Ok(p);
    }
    for _ in 0..cfg.max_iter {
        let s = kalman_rts(y, &p);
        let r = (0..n).map(|t| (y[t] - s.mean[t]).powi(2) + s.var[t]).sum::<f64>() / n as f64;
        let q = (1..n)
            .map(|t| (s.mean[t] - s.mean[t - 1]).powi(2) + s.var[t] + s.var[t - 1] - 2.0 * s.lag_cov[t])
            .sum::<f64>()
            / (n - 1) as f64;
        let (q, r) = (q.max(floor), r.max(floor));
        let change = ((q - p.process_var).abs() / p.process_var).max((r - p.observation_var).abs() / p.observation_var);
        p.process_var = q;
        p.observation_var = r;
        if change < cfg.tol {
            break;
        }
    }
    Ok(p)
}

/// Smooth one scalar sequence.
pub fn smooth_series(y: &[f64], cfg: &LdsConfig) -> Result<Vec<f64>> {
    let p = fit_lds(y, cfg)?;
    if y.len() < 2 || variance(y) == 0.0 {
        return Ok(y.to_vec());
    }
    Ok(kalman_rts(y, &p).mean)
}

/// Smooth a time-ordered sequence of feature vectors from one trial, each
/// dimension independently.
pub fn lds_smooth(sequence: &[Vec<f64>], cfg: &LdsConfig) -> Result<Vec<Vec<f64>>> {
    let Some(first) = sequence.first() else { return Ok(Vec::new()) };
    let dim = first.len();
    if sequence.iter().any(|v| v.len() != dim) {
        return Err(Error::data("feature vectors in a sequence differ in length"));
    }
    let mut out = vec![vec![0.0; dim]; sequence.len()];
    for d in 0..dim {
        let column: Vec<f64> = sequence.iter().map(|v| v[d]).collect();
        let smoothed = smooth_series(&column, cfg).map_err(|e| e.context(&format!("dimension {d}")))?;
        for (row, v) in out.iter_mut().zip(smoothed) {
            row[d] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    #[test]
    fn constant_and_singleton_pass_through() {
        let seq = vec![vec![2.5, -1.0]; 12];
        assert_eq!(lds_smooth(&seq, &LdsConfig::default()).unwrap(), seq);
        let one = vec![vec![3.0, 4.0, 5.0]];
        assert_eq!(lds_smooth(&one, &LdsConfig::default()).unwrap(), one);
        assert!(lds_smooth(&[], &LdsConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn nan_rejected() {
        let seq = vec![vec![1.0], vec![f64::NAN], vec![2.0]];
        assert!(matches!(lds_smooth(&seq, &LdsConfig::default()), Err(Error::Data(_))));
    }

    #[test]
    fn shape_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seq: Vec<Vec<f64>> = (0..17).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let out = lds_smooth(&seq, &LdsConfig::default()).unwrap();
        assert_eq!(out.len(), 17);
        assert!(out.iter().all(|v| v.len() == 4));
    }

    #[test]
    fn step_plus_noise_is_denoised() {
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let clean: Vec<f64> = (0..100).map(|t| if t < 50 { 0.0 } else { 1.0 }).collect();
            let noisy: Vec<f64> = clean.iter().map(|c| c + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let out = smooth_series(&noisy, &LdsConfig::default()).unwrap();
            let mse = |x: &[f64]| x.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 100.0;
            if mse(&out) < mse(&noisy) {
                wins += 1;
            }
        }
        assert!(wins >= 95, "{wins}/100");
    }

    #[test]
    fn em_recovers_noise_ratio_roughly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut x = 0.0;
        let y: Vec<f64> = (0..2000)
            .map(|_| {
                x += 0.1 * rng.sample::<f64, _>(StandardNormal);
                x + 1.0 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let p = fit_lds(&y, &LdsConfig { max_iter: 200, tol: 1e-8 }).unwrap();
        assert!((p.observation_var - 1.0).abs() < 0.2, "{p:?}");
        assert!(p.process_var < 0.1, "{p:?}");
    }
}
