//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::default_c_grid;
use crate::connectivity::{Metric, WelchConfig};
use crate::error::{Error, Result};
use crate::fusion::{Activation, DccaConfig};
use crate::graph_features::{FeatureKind, NegativeTriangles, PowerIteration};
use crate::signal::{BandSpec, PreprocessConfig};
use crate::smoothing::LdsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub enabled: bool,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    /// `0` keeps the input rate.
    pub target_fs: f64,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self { enabled: true, low_hz: 1.0, high_hz: 50.0, order: 4, target_fs: 200.0 }
    }
}

impl PreprocessSection {
    pub fn to_config(&self) -> PreprocessConfig {
        PreprocessConfig {
            low_hz: self.low_hz,
            high_hz: self.high_hz,
            order: self.order,
            target_fs: (self.target_fs > 0.0).then_some(self.target_fs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdsSection {
    pub enabled: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LdsSection {
    fn default() -> Self {
        let d = LdsConfig::default();
        Self { enabled: true, max_iter: d.max_iter, tol: d.tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrmrSection {
    pub enabled: bool,
    /// Number of features kept, clamped to the available dimension.
    pub k: usize,
}

impl Default for MrmrSection {
    fn default() -> Self {
        Self { enabled: true, k: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub c_grid: Vec<f64>,
    pub inner_folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        Self { c_grid: default_c_grid(), inner_folds: 3, tol: 1e-4, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub enabled: bool,
    /// Candidate `[n1, n2, n3]` stacks, shared by both branches.
    pub layer_grid: Vec<Vec<usize>>,
    pub learning_rates: Vec<f64>,
    pub epochs: usize,
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub hidden_activation: Activation,
}

impl Default for FusionSection {
    fn default() -> Self {
        let d = DccaConfig::default();
        Self {
            enabled: false,
            layer_grid: vec![d.layers1.clone()],
            learning_rates: vec![d.learning_rate],
            epochs: d.epochs,
            r1: d.r1,
            r2: d.r2,
            alpha: d.alpha,
            hidden_activation: d.hidden_activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub bands: Vec<BandSpec>,
    pub filter_order: usize,
    pub window_sec: f64,
    pub metric: Metric,
    pub welch: WelchConfig,
    /// Channel names to keep; empty keeps every channel.
    pub channel_subset: Vec<String>,
    pub threshold_grid: Vec<f64>,
    pub feature: FeatureKind,
    pub negative_triangles: NegativeTriangles,
    pub power_iteration: PowerIteration,
    /// Also evaluate every band on its own.
    pub per_band: bool,
    pub preprocess: PreprocessSection,
    pub lds: LdsSection,
    pub mrmr: MrmrSection,
    pub svm: SvmSection,
    pub fusion: FusionSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            bands: BandSpec::five_bands(),
            filter_order: 4,
            window_sec: 4.0,
            metric: Metric::Correlation,
            welch: WelchConfig::default(),
            channel_subset: Vec::new(),
            threshold_grid: vec![0.2],
            feature: FeatureKind::Strength,
            negative_triangles: NegativeTriangles::Signed,
            power_iteration: PowerIteration::default(),
            per_band: true,
            preprocess: PreprocessSection::default(),
            lds: LdsSection::default(),
            mrmr: MrmrSection::default(),
            svm: SvmSection::default(),
            fusion: FusionSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::param("at least one band is required"));
        }
        if !(self.window_sec > 0.0) {
            return Err(Error::param(format!("window length must be positive, got {}", self.window_sec)));
        }
        if self.threshold_grid.is_empty() || self.threshold_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::param("threshold grid must be nonempty with values in [0, 1]"));
        }
        if self.svm.c_grid.is_empty() || self.svm.c_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::param("C grid must be nonempty and positive"));
        }
        if self.fusion.enabled && (self.fusion.layer_grid.is_empty() || self.fusion.learning_rates.is_empty()) {
            return Err(Error::param("fusion grids must be nonempty"));
        }
        Ok(())
    }

    pub fn lds_config(&self) -> LdsConfig {
        LdsConfig { max_iter: self.lds.max_iter, tol: self.lds.tol }
    }

    pub fn dcca_config(&self, layers: &[usize], learning_rate: f64, seed: u64) -> DccaConfig {
        DccaConfig {
            layers1: layers.to_vec(),
            layers2: layers.to_vec(),
            hidden_activation: self.fusion.hidden_activation,
            r1: self.fusion.r1,
            r2: self.fusion.r2,
            learning_rate,
            epochs: self.fusion.epochs,
            seed,
            alpha: self.fusion.alpha,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml("metric = \"coherence\"\n[fusion]\nenabled = true\n").unwrap();
        assert_eq!(cfg.metric, Metric::Coherence);
        assert!(cfg.fusion.enabled);
        assert_eq!(cfg.bands.len(), 5);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("threshold_grid = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml("window_sec = 0.0").is_err());
        assert!(ExperimentConfig::from_toml("no_such_key = 1").is_err());
    }
}
