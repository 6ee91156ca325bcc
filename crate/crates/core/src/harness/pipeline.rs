//! Fold-wise orchestration: connectivity once per trial, then per fold the
//! training-only fits (subnetworks, mRMR, DCCA, SVM) and the test evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use log::{info, warn};
use nalgebra::DMatrix;
use ndarray::Axis;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::manifest::{DatasetManifest, Fold, Protocol, TrialKey};
use crate::classify::{
    grid_search, group_folds, holdout_accuracy, select_and_train, GridResult, Standardizer, SvmConfig,
    SvmModel,
};
use crate::connectivity::{connectivity, ChannelSubset, ConnectivityMatrix};
use crate::error::{Error, Result};
use crate::fusion::{train_dcca, DccaParams};
use crate::graph_features::{concat_bands, extract};
use crate::selection::{mrmr_select, Discretizer, SelectionResult};
use crate::signal::{band_decompose, io, preprocess, segment, BandSpec, Recording};
use crate::smoothing::lds_smooth;
use crate::subnetwork::{apply_mask, select_critical_subnetwork, write_edge_list, CriticalSubnetwork};
use crate::table;

/// Connectivity of one trial, `matrices[band][window]`, plus aligned secondary rows.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub label: usize,
    pub matrices: Vec<Vec<ConnectivityMatrix>>,
    pub secondary: Option<Vec<Vec<f64>>>,
}

impl TrialData {
    pub fn n_windows(&self) -> usize {
        self.matrices.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub protocol: Protocol,
    pub labels: Vec<String>,
    pub bands: Vec<BandSpec>,
    pub trials: BTreeMap<TrialKey, TrialData>,
}

impl PreparedData {
    /// A copy holding only the trials accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(&TrialKey) -> bool) -> PreparedData {
        PreparedData {
            protocol: self.protocol,
            labels: self.labels.clone(),
            bands: self.bands.clone(),
            trials: self.trials.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (*k, v.clone())).collect(),
        }
    }

    pub fn has_secondary(&self) -> bool {
        !self.trials.is_empty() && self.trials.values().all(|t| t.secondary.is_some())
    }
}

fn load_recording(manifest: &DatasetManifest, idx: usize) -> Result<Recording> {
    let entry = &manifest.trials[idx];
    let path = manifest.resolve(&entry.eeg);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let fs = manifest.fs.ok_or_else(|| Error::param("CSV recordings need `fs` in the manifest"))?;
        io::load_csv(&path, fs, entry.meta())
    } else {
        io::load_ncr1(&path, entry.meta())
    }
}

fn keep_channels(rec: Recording, names: &[String]) -> Result<Recording> {
    if names.is_empty() {
        return Ok(rec);
    }
    let subset = ChannelSubset::new(names, &rec.channels)?;
    let samples = rec.samples.select(Axis(0), &subset.indices);
    let mut out = Recording::new(samples, rec.fs, subset.names, rec.meta.clone())?;
    out.band = rec.band;
    Ok(out)
}

/// Windowed band connectivity of one recording.
pub fn trial_connectivity(rec: &Recording, cfg: &ExperimentConfig) -> Result<Vec<Vec<ConnectivityMatrix>>> {
    let rec = if cfg.preprocess.enabled { preprocess(rec, &cfg.preprocess.to_config())? } else { rec.clone() };
    let rec = keep_channels(rec, &cfg.channel_subset)?;
    band_decompose(&rec, &cfg.bands, cfg.filter_order)?
        .into_iter()
        .map(|(_, band_rec)| {
            segment(&band_rec, cfg.window_sec)?
                .iter()
                .map(|seg| connectivity(seg, cfg.metric, &cfg.welch))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Load every trial and compute its connectivity. Fold-independent.
pub fn prepare(manifest: &DatasetManifest, cfg: &ExperimentConfig) -> Result<PreparedData> {
    let with_secondary = manifest.has_secondary();
    let trials = (0..manifest.trials.len())
        .into_par_iter()
        .map(|i| {
            let entry = &manifest.trials[i];
            let label = format!("trial {:?}", entry.key());
            let run = || -> Result<(TrialKey, TrialData)> {
                let rec = load_recording(manifest, i)?;
                let mut matrices = trial_connectivity(&rec, cfg)?;
                let mut secondary = None;
                if with_secondary {
                    let path = manifest.resolve(entry.secondary.as_ref().expect("checked by has_secondary"));
                    let mut rows: Vec<_> = table::load(&path)?.rows;
                    rows.sort_by_key(|r| r.window_index);
                    let mut rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.values).collect();
                    let eeg = matrices.first().map_or(0, Vec::len);
                    if rows.len() != eeg {
                        warn!("{label}: {eeg} EEG windows vs {} secondary rows, truncating", rows.len());
                        let n = eeg.min(rows.len());
                        rows.truncate(n);
                        matrices.iter_mut().for_each(|m| m.truncate(n));
                    }
                    secondary = Some(rows);
                }
                Ok((entry.key(), TrialData { label: entry.label, matrices, secondary }))
            };
            run().map_err(|e| e.context(&label))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(PreparedData { protocol: manifest.protocol, labels: manifest.labels.clone(), bands: cfg.bands.clone(), trials })
}

/// The population a classifier is trained for: a subject, or a subject-session under `seed3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitKey {
    pub subject: u32,
    pub session: Option<u32>,
}

impl UnitKey {
    pub fn of(protocol: Protocol, key: &TrialKey) -> Self {
        let session = (protocol == Protocol::Seed3).then_some(key.session);
        Self { subject: key.subject, session }
    }
}

impl fmt::Display for UnitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.session {
            Some(s) => write!(f, "s{:02}-e{s}", self.subject),
            None => write!(f, "s{:02}", self.subject),
        }
    }
}

/// Which classifiers a fold fit produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modalities {
    pub secondary: bool,
    pub fused: bool,
}

/// mRMR selection followed by an SVM on EEG features.
#[derive(Debug, Clone)]
pub struct EegHead {
    pub discretizer: Option<Discretizer>,
    pub selection: Option<SelectionResult>,
    pub svm: SvmModel,
    pub grid: GridResult<f64>,
}

impl EegHead {
    pub fn project(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match &self.selection {
            Some(s) => s.project(rows),
            None => rows.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SecondaryHead {
    pub svm: SvmModel,
    pub grid: GridResult<f64>,
}

#[derive(Debug, Clone)]
pub struct FusedHead {
    pub scaler1: Standardizer,
    pub scaler2: Standardizer,
    pub layers: Vec<usize>,
    pub learning_rate: f64,
    pub dcca: DccaParams,
    pub svm: SvmModel,
    pub grid: GridResult<f64>,
}

impl FusedHead {
    fn features(&self, eeg: &[Vec<f64>], sec: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let z1 = to_matrix(&self.scaler1.transform(eeg));
        let z2 = to_matrix(&self.scaler2.transform(sec));
        Ok(to_rows(&self.dcca.fused(&z1, &z2)?))
    }
}

#[derive(Debug, Clone)]
pub struct UnitModel {
    pub eeg: EegHead,
    pub secondary: Option<SecondaryHead>,
    pub fused: Option<FusedHead>,
}

/// Everything fitted on one fold's training trials.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub fold: usize,
    pub bands: Vec<String>,
    pub threshold: f64,
    pub threshold_scores: Vec<f64>,
    pub subnetworks: Vec<CriticalSubnetwork>,
    pub units: BTreeMap<UnitKey, UnitModel>,
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn svm_config(cfg: &ExperimentConfig, seed: u64) -> SvmConfig {
    SvmConfig { c: 1.0, tol: cfg.svm.tol, max_iter: cfg.svm.max_iter, seed }
}

/// Deterministic per-(fold, unit) seed.
fn unit_seed(base: u64, fold: usize, unit: &UnitKey) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((fold as u64).to_le_bytes());
    h.update(unit.subject.to_le_bytes());
    h.update(unit.session.unwrap_or(0).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

fn group_of(key: &TrialKey) -> u64 {
    (u64::from(key.session) << 32) | u64::from(key.trial)
}

/// Critical subnetworks of the selected bands from the training trials of all subjects.
pub fn select_subnetworks(
    data: &PreparedData,
    train: &BTreeSet<TrialKey>,
    bands: &[usize],
    t: f64,
) -> Result<Vec<CriticalSubnetwork>> {
    let label_set: Vec<usize> = (0..data.labels.len()).collect();
    bands
        .iter()
        .map(|&b| {
            let mut mats = Vec::new();
            let mut labels = Vec::new();
            for key in train {
                let trial = &data.trials[key];
                mats.extend(trial.matrices[b].iter().cloned());
                labels.extend(std::iter::repeat_n(trial.label, trial.n_windows()));
            }
            // Classes absent from this training fold are skipped rather than failing.
            let present: Vec<usize> = label_set.iter().copied().filter(|c| labels.contains(c)).collect();
            select_critical_subnetwork(&mats, &labels, &present, t)
                .map_err(|e| e.context(&format!("band {}", data.bands[b].name)))
        })
        .collect()
}

/// Masked, band-concatenated, optionally smoothed feature rows of one trial.
fn trial_features(
    trial: &TrialData,
    bands: &[usize],
    subnetworks: &[CriticalSubnetwork],
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<f64>>> {
    let order: Vec<String> = subnetworks.iter().filter_map(|s| s.band.as_ref().map(|b| b.name.clone())).collect();
    let rows = (0..trial.n_windows())
        .map(|w| {
            let records = bands
                .iter()
                .zip(subnetworks)
                .map(|(&b, sub)| {
                    let masked = apply_mask(&trial.matrices[b][w], sub)?;
                    extract(&masked, cfg.feature, cfg.negative_triangles, cfg.power_iteration)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(concat_bands(&records, &order)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    if cfg.lds.enabled {
        lds_smooth(&rows, &cfg.lds_config())
    } else {
        Ok(rows)
    }
}

pub type FeatureMap = BTreeMap<TrialKey, Vec<Vec<f64>>>;

/// Feature rows of the given trials under fitted subnetworks.
pub fn features_for(
    data: &PreparedData,
    keys: &BTreeSet<TrialKey>,
    bands: &[usize],
    subnetworks: &[CriticalSubnetwork],
    cfg: &ExperimentConfig,
) -> Result<FeatureMap> {
    keys.par_iter()
        .map(|k| {
            trial_features(&data.trials[k], bands, subnetworks, cfg)
                .map(|f| (*k, f))
                .map_err(|e| e.context(&format!("features of trial {k:?}")))
        })
        .collect()
}

/// Stacked rows, labels and trial groups of a unit's trials.
struct UnitRows {
    eeg: Vec<Vec<f64>>,
    secondary: Vec<Vec<f64>>,
    labels: Vec<usize>,
    groups: Vec<u64>,
}

fn unit_rows(data: &PreparedData, keys: &[TrialKey], features: &FeatureMap) -> UnitRows {
    let mut out = UnitRows { eeg: Vec::new(), secondary: Vec::new(), labels: Vec::new(), groups: Vec::new() };
    for k in keys {
        let trial = &data.trials[k];
        let rows = &features[k];
        out.eeg.extend(rows.iter().cloned());
        if let Some(sec) = &trial.secondary {
            out.secondary.extend(sec.iter().take(rows.len()).cloned());
        }
        out.labels.extend(std::iter::repeat_n(trial.label, rows.len()));
        out.groups.extend(std::iter::repeat_n(group_of(k), rows.len()));
    }
    out
}

fn units_of(data: &PreparedData, keys: &BTreeSet<TrialKey>) -> BTreeMap<UnitKey, Vec<TrialKey>> {
    let mut out: BTreeMap<UnitKey, Vec<TrialKey>> = BTreeMap::new();
    for k in keys {
        out.entry(UnitKey::of(data.protocol, k)).or_default().push(*k);
    }
    out
}

fn fit_eeg_head(rows: &UnitRows, cfg: &ExperimentConfig, seed: u64) -> Result<EegHead> {
    let (discretizer, selection) = if cfg.mrmr.enabled {
        let d = Discretizer::fit(&rows.eeg)?;
        let dim = rows.eeg.first().map_or(0, Vec::len);
        let s = mrmr_select(&d.transform(&rows.eeg)?, &rows.labels, cfg.mrmr.k.min(dim))?;
        (Some(d), Some(s))
    } else {
        (None, None)
    };
    let x = match &selection {
        Some(s) => s.project(&rows.eeg),
        None => rows.eeg.clone(),
    };
    let (svm, grid) =
        select_and_train(&x, &rows.labels, &rows.groups, &cfg.svm.c_grid, cfg.svm.inner_folds, &svm_config(cfg, seed))?;
    Ok(EegHead { discretizer, selection, svm, grid })
}

fn subset<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn fit_fused_head(eeg: &[Vec<f64>], rows: &UnitRows, cfg: &ExperimentConfig, seed: u64) -> Result<FusedHead> {
    let candidates: Vec<(Vec<usize>, f64)> = cfg
        .fusion
        .layer_grid
        .iter()
        .flat_map(|l| cfg.fusion.learning_rates.iter().map(move |&lr| (l.clone(), lr)))
        .collect();
    let fit = |x1: &[Vec<f64>], x2: &[Vec<f64>], layers: &[usize], lr: f64| -> Result<(Standardizer, Standardizer, DccaParams)> {
        let s1 = Standardizer::fit(x1)?;
        let s2 = Standardizer::fit(x2)?;
        let (params, log) =
            train_dcca(&to_matrix(&s1.transform(x1)), &to_matrix(&s2.transform(x2)), &cfg.dcca_config(layers, lr, seed))?;
        log::debug!("DCCA {layers:?} lr {lr:e}: final corr {:?}", log.final_corr());
        Ok((s1, s2, params))
    };
    let pick = if candidates.len() == 1 {
        0
    } else {
        let folds = group_folds(&rows.groups, cfg.svm.inner_folds);
        grid_search(&candidates, &folds, |(layers, lr), tr, va| {
            let (s1, s2, p) = fit(&subset(eeg, tr), &subset(&rows.secondary, tr), layers, *lr)?;
            let head = |x1: &[Vec<f64>], x2: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
                Ok(to_rows(&p.fused(&to_matrix(&s1.transform(x1)), &to_matrix(&s2.transform(x2)))?))
            };
            let mut x = head(&subset(eeg, tr), &subset(&rows.secondary, tr))?;
            let n_train = x.len();
            x.extend(head(&subset(eeg, va), &subset(&rows.secondary, va))?);
            let y: Vec<usize> = tr.iter().chain(va).map(|&i| rows.labels[i]).collect();
            let idx_tr: Vec<usize> = (0..n_train).collect();
            let idx_va: Vec<usize> = (n_train..y.len()).collect();
            holdout_accuracy(&x, &y, &idx_tr, &idx_va, &svm_config(cfg, seed))
        })?
        .best_index
    };
    let (layers, learning_rate) = candidates[pick].clone();
    let (scaler1, scaler2, dcca) = fit(eeg, &rows.secondary, &layers, learning_rate)?;
    let fused = to_rows(&dcca.fused(&to_matrix(&scaler1.transform(eeg)), &to_matrix(&scaler2.transform(&rows.secondary)))?);
    let (svm, grid) =
        select_and_train(&fused, &rows.labels, &rows.groups, &cfg.svm.c_grid, cfg.svm.inner_folds, &svm_config(cfg, seed))?;
    Ok(FusedHead { scaler1, scaler2, layers, learning_rate, dcca, svm, grid })
}

fn fit_unit(rows: &UnitRows, cfg: &ExperimentConfig, modalities: Modalities, seed: u64) -> Result<UnitModel> {
    let eeg = fit_eeg_head(rows, cfg, seed).map_err(|e| e.context("EEG classifier"))?;
    let secondary = if modalities.secondary {
        let (svm, grid) = select_and_train(
            &rows.secondary,
            &rows.labels,
            &rows.groups,
            &cfg.svm.c_grid,
            cfg.svm.inner_folds,
            &svm_config(cfg, seed),
        )
        .map_err(|e| e.context("secondary classifier"))?;
        Some(SecondaryHead { svm, grid })
    } else {
        None
    };
    let fused = if modalities.fused {
        Some(fit_fused_head(&eeg.project(&rows.eeg), rows, cfg, seed).map_err(|e| e.context("fusion"))?)
    } else {
        None
    };
    Ok(UnitModel { eeg, secondary, fused })
}

/// Mean inner-validation accuracy of the EEG head for threshold `t`.
fn threshold_score(data: &PreparedData, fold: &Fold, bands: &[usize], t: f64, cfg: &ExperimentConfig) -> Result<f64> {
    let subs = select_subnetworks(data, &fold.train, bands, t)?;
    let features = features_for(data, &fold.train, bands, &subs, cfg)?;
    let units = units_of(data, &fold.train);
    let scores = units
        .par_iter()
        .map(|(unit, keys)| {
            let rows = unit_rows(data, keys, &features);
            fit_eeg_head(&rows, cfg, unit_seed(cfg.seed, fold.index, unit)).map(|h| h.grid.scores[h.grid.best_index])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len().max(1) as f64)
}

/// Fit every statistic of a fold. Only trials in `fold.train` are read.
pub fn fit_fold(
    data: &PreparedData,
    fold: &Fold,
    bands: &[usize],
    cfg: &ExperimentConfig,
    modalities: Modalities,
) -> Result<FoldModel> {
    let label = format!("fold {}", fold.index);
    let run = || -> Result<FoldModel> {
        let grid = &cfg.threshold_grid;
        let (threshold, threshold_scores) = if grid.len() == 1 {
            (grid[0], vec![])
        } else {
            let scores = grid
                .iter()
                .map(|&t| threshold_score(data, fold, bands, t, cfg))
                .collect::<Result<Vec<_>>>()?;
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s > scores[best] {
                    best = i;
                }
            }
            (grid[best], scores)
        };
        let subnetworks = select_subnetworks(data, &fold.train, bands, threshold)?;
        let features = features_for(data, &fold.train, bands, &subnetworks, cfg)?;
        let units = units_of(data, &fold.train)
            .into_par_iter()
            .map(|(unit, keys)| {
                let rows = unit_rows(data, &keys, &features);
                fit_unit(&rows, cfg, modalities, unit_seed(cfg.seed, fold.index, &unit))
                    .map(|m| (unit, m))
                    .map_err(|e| e.context(&format!("unit {unit}")))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(FoldModel {
            fold: fold.index,
            bands: bands.iter().map(|&b| data.bands[b].name.clone()).collect(),
            threshold,
            threshold_scores,
            subnetworks,
            units,
        })
    };
    run().map_err(|e| e.context(&label))
}

/// Test-set labels and predictions of one unit under one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPredictions {
    pub unit: UnitKey,
    pub fold: usize,
    pub modality: String,
    pub truth: Vec<usize>,
    pub pred: Vec<usize>,
}

/// Apply a fitted fold to its test trials.
pub fn evaluate_fold(
    model: &FoldModel,
    data: &PreparedData,
    fold: &Fold,
    bands: &[usize],
    cfg: &ExperimentConfig,
) -> Result<Vec<UnitPredictions>> {
    let features = features_for(data, &fold.test, bands, &model.subnetworks, cfg)?;
    let mut out = Vec::new();
    for (unit, keys) in units_of(data, &fold.test) {
        let Some(um) = model.units.get(&unit) else {
            return Err(Error::data(format!("fold {}: unit {unit} has test trials but no training trials", fold.index)));
        };
        let rows = unit_rows(data, &keys, &features);
        let eeg = um.eeg.project(&rows.eeg);
        let mut push = |modality: &str, pred: Vec<usize>| {
            out.push(UnitPredictions {
                unit,
                fold: fold.index,
                modality: modality.to_string(),
                truth: rows.labels.clone(),
                pred,
            })
        };
        push("eeg", um.eeg.svm.predict(&eeg)?);
        if let Some(h) = &um.secondary {
            push("secondary", h.svm.predict(&rows.secondary)?);
        }
        if let Some(h) = &um.fused {
            push("fused", h.svm.predict(&h.features(&eeg, &rows.secondary)?)?);
        }
    }
    Ok(out)
}

fn put_f64s(h: &mut Sha256, v: &[f64]) {
    for x in v {
        h.update(x.to_le_bytes());
    }
}

/// SHA-256 over every fitted statistic of a fold.
pub fn fold_digest(model: &FoldModel) -> String {
    let mut h = Sha256::new();
    h.update(format!("fold {} bands {:?} threshold {:?}\n", model.fold, model.bands, model.threshold));
    put_f64s(&mut h, &model.threshold_scores);
    for sub in &model.subnetworks {
        let mut buf = Vec::new();
        write_edge_list(sub, &mut buf).expect("writing to a Vec cannot fail");
        h.update(&buf);
    }
    for (unit, um) in &model.units {
        h.update(format!("unit {unit}\n"));
        if let Some(d) = &um.eeg.discretizer {
            put_f64s(&mut h, &d.mean);
            put_f64s(&mut h, &d.std);
        }
        if let Some(s) = &um.eeg.selection {
            for i in &s.indices {
                h.update((*i as u64).to_le_bytes());
            }
        }
        h.update(um.eeg.svm.to_bytes());
        if let Some(s) = &um.secondary {
            h.update(s.svm.to_bytes());
        }
        if let Some(f) = &um.fused {
            put_f64s(&mut h, &f.scaler1.mean);
            put_f64s(&mut h, &f.scaler1.std);
            put_f64s(&mut h, &f.scaler2.mean);
            put_f64s(&mut h, &f.scaler2.std);
            h.update(f.dcca.to_bytes());
            h.update(f.svm.to_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Identity of a fold's training data, used to tag mRMR selections.
pub fn fold_checksum(fold: &Fold) -> String {
    let mut h = Sha256::new();
    for k in &fold.train {
        h.update(format!("{}:{}:{};", k.subject, k.session, k.trial));
    }
    hex::encode(h.finalize())
}

/// Fits and predictions of one configuration over all folds.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub models: Vec<FoldModel>,
    pub predictions: Vec<UnitPredictions>,
}

pub fn run_variant(
    data: &PreparedData,
    folds: &[Fold],
    bands: &[usize],
    cfg: &ExperimentConfig,
    modalities: Modalities,
) -> Result<VariantRun> {
    let mut run = VariantRun { models: Vec::new(), predictions: Vec::new() };
    for fold in folds {
        let model = fit_fold(data, fold, bands, cfg, modalities)?;
        let preds = evaluate_fold(&model, data, fold, bands, cfg).map_err(|e| e.context(&format!("fold {}", fold.index)))?;
        info!("fold {} bands {:?}: t = {}", fold.index, model.bands, model.threshold);
        run.models.push(model);
        run.predictions.extend(preds);
    }
    Ok(run)
}
