//! Accuracy summaries, confusion matrices and their text/CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::pipeline::{UnitKey, UnitPredictions};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityReport {
    pub name: String,
    /// Pooled test accuracy per unit, in unit order.
    pub units: Vec<(String, f64)>,
    pub mean: f64,
    /// Population standard deviation over units.
    pub std: f64,
    /// Raw counts, `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized counts; rows without samples are zero.
    pub confusion: Vec<Vec<f64>>,
}

impl ModalityReport {
    pub fn from_predictions(name: &str, n_classes: usize, preds: &[&UnitPredictions]) -> Self {
        let mut per_unit: BTreeMap<UnitKey, (usize, usize)> = BTreeMap::new();
        let mut counts = vec![vec![0usize; n_classes]; n_classes];
        for p in preds {
            let e = per_unit.entry(p.unit).or_default();
            for (&t, &y) in p.truth.iter().zip(&p.pred) {
                e.0 += usize::from(t == y);
                e.1 += 1;
                counts[t][y] += 1;
            }
        }
        let units: Vec<(String, f64)> = per_unit
            .iter()
            .map(|(u, (c, n))| (u.to_string(), if *n == 0 { 0.0 } else { *c as f64 / *n as f64 }))
            .collect();
        let (mean, std) = mean_std(units.iter().map(|(_, a)| *a));
        let confusion = counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
            })
            .collect();
        Self { name: name.to_string(), units, mean, std, counts, confusion }
    }
}

pub fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldSummary {
    pub fold: usize,
    pub threshold: f64,
    pub n_train_trials: usize,
    pub n_test_trials: usize,
    /// Selected C per unit and classifier, e.g. `("s01", "eeg", 0.25)`.
    pub selected_c: Vec<(String, String, f64)>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub protocol: String,
    pub labels: Vec<String>,
    pub seed: u64,
    /// Name of the headline modality (`fused` when fusion ran, else `eeg`).
    pub primary: String,
    pub modalities: Vec<ModalityReport>,
    /// Single-band EEG results, in band order.
    pub per_band: Vec<ModalityReport>,
    pub folds: Vec<FoldSummary>,
    pub config_echo: String,
}

impl Report {
    pub fn modality(&self, name: &str) -> Option<&ModalityReport> {
        self.modalities.iter().find(|m| m.name == name)
    }

    pub fn primary_report(&self) -> &ModalityReport {
        self.modality(&self.primary).expect("primary modality is always present")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "protocol: {}", self.protocol);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "labels: {}", self.labels.join(", "));
        let p = self.primary_report();
        let _ = writeln!(s, "primary: {} accuracy {:.4} ± {:.4}", p.name, p.mean, p.std);
        for m in &self.modalities {
            let _ = writeln!(s, "\n[{}] mean {:.4} std {:.4}", m.name, m.mean, m.std);
            for (u, a) in &m.units {
                let _ = writeln!(s, "  {u}: {a:.4}");
            }
            let _ = writeln!(s, "  confusion (rows = true, row-normalized):");
            for (label, row) in self.labels.iter().zip(&m.confusion) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
                let _ = writeln!(s, "    {label:>10} {}", cells.join(" "));
            }
        }
        if !self.per_band.is_empty() {
            let _ = writeln!(s, "\nper-band EEG accuracy:");
            for b in &self.per_band {
                let _ = writeln!(s, "  {}: {:.4} ± {:.4}", b.name, b.mean, b.std);
            }
        }
        let _ = writeln!(s, "\nfolds:");
        for f in &self.folds {
            let _ = writeln!(
                s,
                "  fold {}: t = {}, {} train / {} test trials, digest {}",
                f.fold, f.threshold, f.n_train_trials, f.n_test_trials, f.digest
            );
            for (u, m, c) in &f.selected_c {
                let _ = writeln!(s, "    {u} {m}: C = {c}");
            }
        }
        let _ = writeln!(s, "\nconfig:\n{}", self.config_echo);
        s
    }

    pub fn accuracies_csv(&self) -> String {
        let mut s = String::from("modality,unit,accuracy\n");
        for m in self.modalities.iter().chain(&self.per_band) {
            for (u, a) in &m.units {
                let _ = writeln!(s, "{},{u},{a}", m.name);
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("modality,mean,std\n");
        for m in self.modalities.iter().chain(&self.per_band) {
            let _ = writeln!(s, "{},{},{}", m.name, m.mean, m.std);
        }
        s
    }

    pub fn confusion_csv(&self, m: &ModalityReport) -> String {
        let mut s = format!("true,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&m.confusion) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{label},{}", cells.join(","));
        }
        s
    }

    pub fn folds_csv(&self) -> String {
        let mut s = String::from("fold,threshold,train_trials,test_trials,digest\n");
        for f in &self.folds {
            let _ = writeln!(s, "{},{},{},{},{}", f.fold, f.threshold, f.n_train_trials, f.n_test_trials, f.digest);
        }
        s
    }

    /// `report.txt`, `summary.csv`, `accuracies.csv`, `folds.csv`, `confusion_<modality>.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(dir.join("accuracies.csv"), self.accuracies_csv())?;
        std::fs::write(dir.join("folds.csv"), self.folds_csv())?;
        for m in &self.modalities {
            std::fs::write(dir.join(format!("confusion_{}.csv", m.name)), self.confusion_csv(m))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(subject: u32, truth: Vec<usize>, pred: Vec<usize>) -> UnitPredictions {
        UnitPredictions { unit: UnitKey { subject, session: None }, fold: 0, modality: "eeg".into(), truth, pred }
    }

    #[test]
    fn accuracy_matches_class_weighted_confusion_trace() {
        let a = preds(1, vec![0, 0, 1, 1, 2], vec![0, 1, 1, 1, 0]);
        let b = preds(2, vec![2, 2, 0], vec![2, 2, 2]);
        let r = ModalityReport::from_predictions("eeg", 3, &[&a, &b]);
        assert_eq!(r.units, vec![("s01".to_string(), 0.6), ("s02".to_string(), 2.0 / 3.0)]);
        for row in &r.confusion {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let n: usize = r.counts.iter().flatten().sum();
        let pooled: f64 = (0..3).map(|c| r.confusion[c][c] * r.counts[c].iter().sum::<usize>() as f64).sum::<f64>() / n as f64;
        assert!((pooled - 5.0 / 8.0).abs() < 1e-12);
        assert!((r.mean - (0.6 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std([1.0, 3.0].into_iter());
        assert_eq!((m, s), (2.0, 1.0));
    }
}
