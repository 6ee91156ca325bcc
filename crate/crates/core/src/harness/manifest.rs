//! Dataset manifests and evaluation protocols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TrialMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Seed3,
    Seedv5,
    DeapArousal,
    DeapValence,
}

impl Protocol {
    fn is_deap(self) -> bool {
        matches!(self, Protocol::DeapArousal | Protocol::DeapValence)
    }

    /// Trials expected per session (SEED) or per subject (DEAP).
    pub fn trials_per_group(self) -> usize {
        if self.is_deap() {
            40
        } else {
            15
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Protocol::Seed3 => "seed3",
            Protocol::Seedv5 => "seedv5",
            Protocol::DeapArousal => "deap-arousal",
            Protocol::DeapValence => "deap-valence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    pub subject: u32,
    #[serde(default = "one")]
    pub session: u32,
    /// 1-based position within the session (SEED) or subject (DEAP).
    pub trial: u32,
    /// Index into the manifest's label list.
    pub label: usize,
    /// NCR1 recording or CSV (`.csv`, needs `fs`).
    pub eeg: PathBuf,
    /// Secondary-modality feature table (NFT1 or `.csv`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<PathBuf>,
}

fn one() -> u32 {
    1
}

impl TrialEntry {
    pub fn key(&self) -> TrialKey {
        TrialKey { subject: self.subject, session: self.session, trial: self.trial }
    }

    pub fn meta(&self) -> TrialMeta {
        TrialMeta { subject_id: self.subject, session_id: self.session, trial_id: self.trial, label: Some(self.label) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialKey {
    pub subject: u32,
    pub session: u32,
    pub trial: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub protocol: Protocol,
    pub labels: Vec<String>,
    #[serde(default)]
    pub channel_layout: String,
    /// Sampling rate for CSV recordings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
    pub trials: Vec<TrialEntry>,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    /// Parse TOML, or JSON when the path ends in `.json`, and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        };
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate(true)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::to_string_pretty(self).expect("manifest is serializable")
        } else {
            toml::to_string(self).expect("manifest is serializable")
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Label range, unique keys and, when `check_files`, file existence.
    pub fn validate(&self, check_files: bool) -> Result<()> {
        if self.labels.len() < 2 {
            return Err(Error::data("a manifest needs at least two labels"));
        }
        let mut seen = BTreeSet::new();
        for t in &self.trials {
            if t.label >= self.labels.len() {
                return Err(Error::data(format!("trial {:?} has label {} outside the label set", t.key(), t.label)));
            }
            if !seen.insert(t.key()) {
                return Err(Error::data(format!("duplicate trial {:?}", t.key())));
            }
            if check_files {
                for p in std::iter::once(&t.eeg).chain(t.secondary.iter()) {
                    if !self.resolve(p).is_file() {
                        return Err(Error::data(format!("missing file {}", self.resolve(p).display())));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn has_secondary(&self) -> bool {
        !self.trials.is_empty() && self.trials.iter().all(|t| t.secondary.is_some())
    }
}

/// One outer split over all subjects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: BTreeSet<TrialKey>,
    pub test: BTreeSet<TrialKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub folds: Vec<Fold>,
}

/// Subject-dependent splits.
///
/// * `seed3`: per session, trials 1–9 train and 10–15 test.
/// * `seedv5`: three folds testing trials 1–5, 6–10, 11–15 of every session.
/// * DEAP: ten folds of four consecutive test videos out of 40.
pub fn build_folds(manifest: &DatasetManifest) -> Result<FoldPlan> {
    let protocol = manifest.protocol;
    let expected = protocol.trials_per_group() as u32;
    let mut groups: BTreeMap<(u32, u32), BTreeSet<u32>> = BTreeMap::new();
    for t in &manifest.trials {
        groups.entry((t.subject, t.session)).or_default().insert(t.trial);
    }
    if groups.is_empty() {
        return Err(Error::data("manifest lists no trials"));
    }
    let full: BTreeSet<u32> = (1..=expected).collect();
    for ((subject, session), trials) in &groups {
        if *trials != full {
            return Err(Error::data(format!(
                "{protocol}: subject {subject} session {session} has {} trials, expected trials 1..={expected}",
                trials.len()
            )));
        }
    }
    if protocol.is_deap() {
        let mut subjects = BTreeSet::new();
        for (subject, _) in groups.keys() {
            if !subjects.insert(*subject) {
                return Err(Error::data(format!("{protocol}: subject {subject} has more than one session")));
            }
        }
    }
    let keys: Vec<TrialKey> = manifest.trials.iter().map(TrialEntry::key).collect();
    let split = |index: usize, is_test: &dyn Fn(&TrialKey) -> bool, in_fold: &dyn Fn(&TrialKey) -> bool| {
        let (test, train): (BTreeSet<TrialKey>, BTreeSet<TrialKey>) =
            keys.iter().filter(|k| in_fold(k)).partition(|k| is_test(k));
        Fold { index, train, test }
    };
    let folds = match protocol {
        Protocol::Seed3 => {
            let sessions: BTreeSet<u32> = groups.keys().map(|(_, s)| *s).collect();
            sessions
                .iter()
                .enumerate()
                .map(|(i, &s)| split(i, &|k| k.trial >= 10, &|k| k.session == s))
                .collect()
        }
        Protocol::Seedv5 => (0..3u32)
            .map(|f| split(f as usize, &|k| (k.trial - 1) / 5 == f, &|_| true))
            .collect(),
        Protocol::DeapArousal | Protocol::DeapValence => (0..10u32)
            .map(|f| split(f as usize, &|k| (k.trial - 1) / 4 == f, &|_| true))
            .collect(),
    };
    Ok(FoldPlan { protocol, folds })
}
