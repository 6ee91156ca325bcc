//! Linear one-vs-rest SVM trained by dual coordinate descent, plus grid search.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NSV1";

/// Default C grid, 2^-10 through 2^10 in steps of 2^2.
pub fn default_c_grid() -> Vec<f64> {
    (-5..=5).map(|k| 2f64.powi(2 * k)).collect()
}

/// Per-dimension z-scoring fit on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let dim = check_rows(x)?;
        let n = x.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    /// Constant training dimensions are only centered.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { v - m })
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-4, max_iter: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Sorted class labels; scores and weights follow this order.
    pub classes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub kernel: Kernel,
    pub c: f64,
    pub scaler: Standardizer,
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map(Vec::len).ok_or_else(|| Error::param("no training samples"))?;
    if let Some(i) = x.iter().position(|r| r.len() != dim) {
        return Err(Error::param(format!("row {i} has {} values, expected {dim}", x[i].len())));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite feature value"));
    }
    Ok(dim)
}

/// Binary L1-loss dual problem over bias-augmented rows; returns (w, b).
fn train_binary(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig, seed: u64) -> (Vec<f64>, f64) {
    let dim = x[0].len();
    let n = x.len();
    let qii: Vec<f64> = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.max_iter {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let xi = &x[i];
            let g = y[i] * (dot(&w, xi) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == cfg.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, cfg.c);
                let d = (alpha[i] - old) * y[i];
                if d != 0.0 {
                    for (wj, xj) in w.iter_mut().zip(xi) {
                        *wj += d * xj;
                    }
                    b += d;
                }
            }
        }
        if pg_max - pg_min < cfg.tol {
            break;
        }
    }
    (w, b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// One-vs-rest linear SVM on standardized features.
pub fn svm_train(x: &[Vec<f64>], y: &[usize], cfg: &SvmConfig) -> Result<SvmModel> {
    check_rows(x)?;
    if x.len() != y.len() {
        return Err(Error::param(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(Error::param(format!("C must be positive, got {}", cfg.c)));
    }
    let classes: Vec<usize> = y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::param("SVM training needs at least two classes"));
    }
    let scaler = Standardizer::fit(x)?;
    let z = scaler.transform(x);
    let fitted: Vec<(Vec<f64>, f64)> = classes
        .par_iter()
        .enumerate()
        .map(|(k, &c)| {
            let target: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            train_binary(&z, &target, cfg, cfg.seed.wrapping_add(k as u64))
        })
        .collect();
    let (weights, bias) = fitted.into_iter().unzip();
    Ok(SvmModel { classes, weights, bias, kernel: Kernel::Linear, c: cfg.c, scaler })
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.scaler.mean.len()
    }

    /// One-vs-rest scores per row, in `classes` order.
    pub fn decision(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(r) = x.iter().find(|r| r.len() != self.dim()) {
            return Err(Error::param(format!("sample has {} values, model expects {}", r.len(), self.dim())));
        }
        Ok(x.iter()
            .map(|r| {
                let z = self.scaler.transform_row(r);
                self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, &z) + b).collect()
            })
            .collect())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(svm_predict(self, x)?.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_checkpoint(&mut out, self).expect("writing to a Vec cannot fail");
        out
    }
}

/// Labels by argmax score (ties to the lowest class) and the raw scores.
pub fn svm_predict(model: &SvmModel, x: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let scores = model.decision(x)?;
    let labels = scores
        .iter()
        .map(|s| {
            let mut best = 0;
            for (k, v) in s.iter().enumerate() {
                if *v > s[best] {
                    best = k;
                }
            }
            model.classes[best]
        })
        .collect();
    Ok((labels, scores))
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Train/validation index pairs that keep every group on one side.
/// Groups are assigned round-robin in sorted order.
pub fn group_folds(groups: &[u64], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let unique: Vec<u64> = groups.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let k = k.min(unique.len());
    if k < 2 {
        return Vec::new();
    }
    (0..k)
        .map(|f| {
            let held: BTreeSet<u64> = unique.iter().skip(f).step_by(k).copied().collect();
            let (val, train): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&i| held.contains(&groups[i]));
            (train, val)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult<P> {
    pub best: P,
    pub best_index: usize,
    /// Mean validation score per grid point.
    pub scores: Vec<f64>,
}

/// Argmax of the mean inner-fold score; ties go to the earliest grid point.
/// Without folds the first point is returned.
pub fn grid_search<P, F>(grid: &[P], folds: &[(Vec<usize>, Vec<usize>)], score: F) -> Result<GridResult<P>>
where
    P: Clone + Sync,
    F: Fn(&P, &[usize], &[usize]) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::param("empty hyperparameter grid"));
    }
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|p| {
            if folds.is_empty() {
                return Ok(0.0);
            }
            let mut total = 0.0;
            for (train, val) in folds {
                total += score(p, train, val)?;
            }
            Ok(total / folds.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best_index] {
            best_index = i;
        }
    }
    Ok(GridResult { best: grid[best_index].clone(), best_index, scores })
}

fn subset<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

/// Validation accuracy of an SVM fit on `train`; a single-class training split
/// predicts that class.
pub fn holdout_accuracy(x: &[Vec<f64>], y: &[usize], train: &[usize], val: &[usize], cfg: &SvmConfig) -> Result<f64> {
    let ytr = subset(y, train);
    let yval = subset(y, val);
    if ytr.iter().collect::<BTreeSet<_>>().len() < 2 {
        let only = ytr.first().copied();
        return Ok(yval.iter().filter(|&&l| Some(l) == only).count() as f64 / yval.len().max(1) as f64);
    }
    let model = svm_train(&subset(x, train), &ytr, cfg)?;
    Ok(accuracy(&model.predict(&subset(x, val))?, &yval))
}

/// Grid search over C with group-wise inner folds, then a refit on all rows.
pub fn select_and_train(
    x: &[Vec<f64>],
    y: &[usize],
    groups: &[u64],
    c_grid: &[f64],
    inner_folds: usize,
    base: &SvmConfig,
) -> Result<(SvmModel, GridResult<f64>)> {
    let folds = group_folds(groups, inner_folds);
    let result = grid_search(c_grid, &folds, |&c, tr, va| holdout_accuracy(x, y, tr, va, &SvmConfig { c, ..base.clone() }))?;
    let model = svm_train(x, y, &SvmConfig { c: result.best, ..base.clone() })?;
    Ok((model, result))
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))
}

pub fn write_checkpoint(w: &mut impl Write, model: &SvmModel) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, model.dim() as u32)?;
    put_u32(w, model.classes.len() as u32)?;
    w.write_all(&[0u8])?;
    put_f64s(w, &[model.c])?;
    for &c in &model.classes {
        put_u32(w, c as u32)?;
    }
    put_f64s(w, &model.scaler.mean)?;
    put_f64s(w, &model.scaler.std)?;
    for wv in &model.weights {
        put_f64s(w, wv)?;
    }
    put_f64s(w, &model.bias)?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<SvmModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format("not an NSV1 checkpoint"));
    }
    let dim = get_u32(r)? as usize;
    let k = get_u32(r)? as usize;
    let mut kernel = [0u8];
    r.read_exact(&mut kernel)?;
    if kernel[0] != 0 {
        return Err(Error::format(format!("unknown kernel code {}", kernel[0])));
    }
    let c = get_f64s(r, 1)?[0];
    let classes = (0..k).map(|_| get_u32(r).map(|v| v as usize)).collect::<Result<_>>()?;
    let mean = get_f64s(r, dim)?;
    let std = get_f64s(r, dim)?;
    let weights = (0..k).map(|_| get_f64s(r, dim)).collect::<Result<_>>()?;
    let bias = get_f64s(r, k)?;
    Ok(SvmModel { classes, weights, bias, kernel: Kernel::Linear, c, scaler: Standardizer { mean, std } })
}
