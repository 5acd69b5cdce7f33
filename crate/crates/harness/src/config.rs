//! Experiment configuration, read from a single TOML file.

use std::path::{Path, PathBuf};

use hopfrc_core::audio::SynthSpec;
use hopfrc_core::features::{ActivationConfig, MelConfig};
use hopfrc_core::readout::{Architecture, TrainConfig};
use hopfrc_core::reservoir::ReservoirConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::manifest::{read_manifest, DatasetManifest};
use crate::suites::Suite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Featurize,
    CompareMel,
    NoiseSweep,
    Classify,
    Reconfigure,
    MixedSignal,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Featurize => "featurize",
            Self::CompareMel => "compare-mel",
            Self::NoiseSweep => "noise-sweep",
            Self::Classify => "classify",
            Self::Reconfigure => "reconfigure",
            Self::MixedSignal => "mixed-signal",
        }
    }
}

/// Readout training settings; the seed comes from the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lr: t.lr,
            batch_size: t.batch_size,
            epochs: t.epochs,
            shuffle: t.shuffle,
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            shuffle: self.shuffle,
        }
    }
}

/// Where clips come from: a CSV manifest if given, else a built-in suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub suite: Suite,
    pub clips_per_class: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub train_fraction: f64,
    /// Published accuracy to print beside the measured one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_target: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::suite(Suite::SoundsA)
    }
}

impl DatasetConfig {
    pub fn suite(suite: Suite) -> Self {
        Self {
            suite,
            clips_per_class: 50,
            manifest: None,
            train_fraction: 0.8,
            published_target: None,
        }
    }

    pub fn load(&self, seed: u64) -> Result<DatasetManifest> {
        match &self.manifest {
            Some(path) => read_manifest(path, seed),
            None => Ok(self.suite.manifest(self.clips_per_class, seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub suite: Suite,
    /// Class the reference and its variants are drawn from.
    pub class: usize,
    pub variants: usize,
    /// Class of the cross-class comparison clip.
    pub other_class: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            suite: Suite::SoundsA,
            class: 0,
            variants: 3,
            other_class: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSweepConfig {
    /// Signal-to-noise ratios in dB; `inf` means no noise.
    pub snr_db: Vec<f64>,
    /// Clean signal; the built-in siren sweep when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<SynthSpec>,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![40.0, 30.0, 20.0],
            signal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconfigureConfig {
    /// Trained model to start from; trained on `base` first when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_checkpoint: Option<PathBuf>,
    pub base: DatasetConfig,
    pub task: DatasetConfig,
    pub epochs: usize,
}

impl Default for ReconfigureConfig {
    fn default() -> Self {
        Self {
            base_checkpoint: None,
            base: DatasetConfig::suite(Suite::SoundsA),
            task: DatasetConfig::suite(Suite::SoundsB),
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixedConfig {
    /// Amplitude of the dominant class relative to the background.
    pub dominant_gain: f64,
    /// Further gains to report window distances for.
    pub gain_sweep: Vec<f64>,
}

impl Default for MixedConfig {
    fn default() -> Self {
        Self {
            dominant_gain: 2.0,
            gain_sweep: vec![1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    /// Output directory; not part of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub reservoir: ReservoirConfig,
    pub activation: ActivationConfig,
    pub mel: MelConfig,
    pub architecture: Architecture,
    pub train: TrainSettings,
    pub dataset: DatasetConfig,
    pub compare: CompareConfig,
    pub noise_sweep: NoiseSweepConfig,
    pub reconfigure: ReconfigureConfig,
    pub mixed: MixedConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Read a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.dataset.manifest);
        fix(&mut cfg.reconfigure.base_checkpoint);
        fix(&mut cfg.reconfigure.base.manifest);
        fix(&mut cfg.reconfigure.task.manifest);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        self.activation.validate()?;
        self.train.with_seed(self.seed).validate()?;
        for d in [&self.dataset, &self.reconfigure.base, &self.reconfigure.task] {
            if !(0.0..=1.0).contains(&d.train_fraction) {
                return Err(HarnessError::Config(format!("train_fraction {} outside [0, 1]", d.train_fraction)));
            }
            if let Some(m) = &d.manifest {
                if !m.exists() {
                    return Err(HarnessError::Config(format!("manifest {} does not exist", m.display())));
                }
            }
        }
        if let Some(c) = &self.reconfigure.base_checkpoint {
            if !c.exists() {
                return Err(HarnessError::Config(format!("checkpoint {} does not exist", c.display())));
            }
        }
        if self.noise_sweep.snr_db.iter().any(|s| s.is_nan()) {
            return Err(HarnessError::Config("SNR values must be numbers".into()));
        }
        Ok(())
    }
}
