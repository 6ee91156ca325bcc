//! Manifests, protocols, synthetic data, experiment orchestration and reports.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::ExperimentConfig;
pub use manifest::{build_folds, DatasetManifest, Fold, FoldPlan, Protocol, TrialEntry, TrialKey};
pub use pipeline::{fit_fold, fold_digest, prepare, FoldModel, Modalities, PreparedData, UnitKey};
pub use report::{ModalityReport, Report};
pub use synth::{synth_generate, SynthSpec};

use crate::error::Result;
use crate::subnetwork::{write_edge_list, CriticalSubnetwork, EdgeSet};
use pipeline::{run_variant, UnitPredictions, VariantRun};
use report::FoldSummary;

/// A finished experiment: the report plus the fitted models of the main run.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: Report,
    pub plan: FoldPlan,
    pub models: Vec<FoldModel>,
}

fn modality_reports(names: &[&str], n_classes: usize, preds: &[UnitPredictions]) -> Vec<ModalityReport> {
    names
        .iter()
        .map(|name| {
            let subset: Vec<&UnitPredictions> = preds.iter().filter(|p| p.modality == *name).collect();
            ModalityReport::from_predictions(name, n_classes, &subset)
        })
        .collect()
}

/// Evaluate a prepared dataset under its protocol.
pub fn run_prepared(data: &PreparedData, plan: &FoldPlan, cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let secondary = data.has_secondary();
    let modalities = Modalities { secondary, fused: secondary && cfg.fusion.enabled };
    let all_bands: Vec<usize> = (0..data.bands.len()).collect();
    let VariantRun { models, predictions } = run_variant(data, &plan.folds, &all_bands, cfg, modalities)?;

    let mut names = vec!["eeg"];
    if modalities.secondary {
        names.push("secondary");
    }
    if modalities.fused {
        names.push("fused");
    }
    let n_classes = data.labels.len();
    let reports = modality_reports(&names, n_classes, &predictions);

    let mut per_band = Vec::new();
    if cfg.per_band && data.bands.len() > 1 {
        let eeg_only = Modalities { secondary: false, fused: false };
        for b in 0..data.bands.len() {
            let run = run_variant(data, &plan.folds, &[b], cfg, eeg_only)?;
            let mut r = modality_reports(&["eeg"], n_classes, &run.predictions).remove(0);
            r.name = data.bands[b].name.clone();
            per_band.push(r);
        }
    }

    let folds = models
        .iter()
        .zip(&plan.folds)
        .map(|(m, f)| {
            let mut selected_c = Vec::new();
            for (unit, um) in &m.units {
                selected_c.push((unit.to_string(), "eeg".to_string(), um.eeg.grid.best));
                if let Some(h) = &um.secondary {
                    selected_c.push((unit.to_string(), "secondary".to_string(), h.grid.best));
                }
                if let Some(h) = &um.fused {
                    selected_c.push((unit.to_string(), "fused".to_string(), h.grid.best));
                }
            }
            FoldSummary {
                fold: f.index,
                threshold: m.threshold,
                n_train_trials: f.train.len(),
                n_test_trials: f.test.len(),
                selected_c,
                digest: fold_digest(m),
            }
        })
        .collect();

    let report = Report {
        protocol: plan.protocol.to_string(),
        labels: data.labels.clone(),
        seed: cfg.seed,
        primary: if modalities.fused { "fused" } else { "eeg" }.to_string(),
        modalities: reports,
        per_band,
        folds,
        config_echo: cfg.to_toml(),
    };
    Ok(ExperimentRun { report, plan: plan.clone(), models })
}

/// Load, prepare and evaluate the dataset described by `manifest`.
pub fn run_experiment(manifest: &DatasetManifest, cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let plan = build_folds(manifest)?;
    let data = prepare(manifest, cfg)?;
    run_prepared(&data, &plan, cfg)
}

#[derive(Debug, Serialize)]
struct ExportEntry {
    fold: usize,
    band: String,
    emotion: Option<String>,
    edges: usize,
    file: PathBuf,
}

fn band_name(sub: &CriticalSubnetwork) -> String {
    sub.band.as_ref().map_or_else(|| "none".to_string(), |b| b.name.clone())
}

/// Per-fold, per-band, per-emotion edge lists plus the merged subnetwork of each band,
/// and an `index.json` describing them.
pub fn export_subnetworks(models: &[FoldModel], labels: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut index = Vec::new();
    for model in models {
        let fold_dir = PathBuf::from(format!("fold{}", model.fold));
        std::fs::create_dir_all(dir.join(&fold_dir))?;
        for sub in &model.subnetworks {
            let band = band_name(sub);
            let mut emit = |emotion: Option<usize>, edges: &EdgeSet| -> Result<()> {
                let tag = emotion.map_or_else(|| "merged".to_string(), |c| labels.get(c).cloned().unwrap_or(c.to_string()));
                let rel = fold_dir.join(format!("{band}_{tag}.csv"));
                let view = CriticalSubnetwork {
                    vertices: sub.vertices.clone(),
                    edges: edges.clone(),
                    band: sub.band.clone(),
                    threshold: sub.threshold,
                    per_class: match emotion {
                        Some(c) => BTreeMap::from([(c, edges.clone())]),
                        None => sub.per_class.clone(),
                    },
                };
                let mut buf = Vec::new();
                write_edge_list(&view, &mut buf)?;
                std::fs::write(dir.join(&rel), buf)?;
                index.push(ExportEntry {
                    fold: model.fold,
                    band: band.clone(),
                    emotion: emotion.map(|c| labels.get(c).cloned().unwrap_or(c.to_string())),
                    edges: edges.len(),
                    file: rel.clone(),
                });
                written.push(dir.join(rel));
                Ok(())
            };
            for (&c, edges) in &sub.per_class {
                emit(Some(c), edges)?;
            }
            emit(None, &sub.edges)?;
        }
    }
    let json = serde_json::to_string_pretty(&index).expect("index is serializable");
    std::fs::write(dir.join("index.json"), json)?;
    Ok(written)
}
