//! Experiment reports and their on-disk form.
//!
//! Everything in `metrics.json` is a function of the configuration, so
//! reruns produce identical bytes. Wall-clock time goes to `timing.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use hopfrc_core::features::FeatureMap;
use hopfrc_core::readout::ConfusionMatrix;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::pgm::encode_pgm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// One row of a distance table. `mel` is absent for Hopf-only studies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub label: String,
    pub hopf: f64,
    pub hopf_normalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mel_normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_hash: String,
    pub class_names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<ClassMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trainable_parameters: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<DistanceRow>,
    /// Experiment-specific scalars and checks.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(kind: ExperimentKind, cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: kind,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            class_names: Vec::new(),
            accuracy: None,
            published_target: None,
            n_train: None,
            n_test: None,
            per_class: Vec::new(),
            confusion: None,
            loss_history: Vec::new(),
            trainable_parameters: None,
            distances: Vec::new(),
            values: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn value_f64(&self, key: &str) -> Option<f64> {
        self.values.get(key)?.as_f64()
    }

    pub fn value_bool(&self, key: &str) -> Option<bool> {
        self.values.get(key)?.as_bool()
    }

    /// Fill accuracy, confusion and per-class metrics from an evaluation.
    pub fn set_confusion(&mut self, confusion: ConfusionMatrix) {
        let precision = confusion.precision();
        let recall = confusion.recall();
        let support = confusion.row_sums();
        self.per_class = self
            .class_names
            .iter()
            .enumerate()
            .map(|(i, c)| ClassMetrics {
                class: c.clone(),
                support: support.get(i).copied().unwrap_or(0),
                precision: precision.get(i).copied().flatten(),
                recall: recall.get(i).copied().flatten(),
            })
            .collect();
        self.accuracy = Some(confusion.accuracy());
        self.n_test = Some(confusion.total());
        self.confusion = Some(confusion);
    }

    pub fn metrics_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A feature map exported as `maps/<stem>.pgm`.
#[derive(Debug, Clone)]
pub struct MapFile {
    pub stem: String,
    pub clip: String,
    pub window: usize,
    pub label: String,
    pub map: FeatureMap,
}

/// Files that accompany a report.
#[derive(Debug, Default)]
pub struct Artifacts {
    /// When set, written under `maps/` together with an `index.csv`.
    pub maps: Option<Vec<MapFile>>,
    pub checkpoint: Option<Checkpoint>,
    pub wall_clock_s: f64,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn confusion_csv(names: &[String], m: &ConfusionMatrix) -> String {
    let mut s = String::from("true\\predicted");
    for n in names {
        write!(s, ",{n}").unwrap();
    }
    s.push('\n');
    for (n, row) in names.iter().zip(&m.counts) {
        s.push_str(n);
        for v in row {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Write the report and its artifacts into `outdir`, creating it if needed.
pub fn report_emit(report: &ExperimentReport, artifacts: &Artifacts, cfg: &ExperimentConfig, outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir).map_err(|e| HarnessError::io(outdir, e))?;
    write(&outdir.join("metrics.json"), report.metrics_json())?;
    let mut echoed = cfg.clone();
    echoed.out = None;
    echoed.experiment = Some(report.experiment);
    write(&outdir.join("config.toml"), echoed.to_toml())?;
    write(
        &outdir.join("timing.json"),
        format!("{{\n  \"wall_clock_s\": {}\n}}\n", artifacts.wall_clock_s),
    )?;
    if let Some(m) = &report.confusion {
        write(&outdir.join("confusion.csv"), confusion_csv(&report.class_names, m))?;
    }
    if !report.loss_history.is_empty() {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in report.loss_history.iter().enumerate() {
            writeln!(s, "{},{l}", i + 1).unwrap();
        }
        write(&outdir.join("loss.csv"), s)?;
    }
    if !report.distances.is_empty() {
        let mut s = String::from("label,hopf,hopf_normalized,mel,mel_normalized\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for d in &report.distances {
            writeln!(s, "{},{},{},{},{}", d.label, d.hopf, d.hopf_normalized, opt(d.mel), opt(d.mel_normalized)).unwrap();
        }
        write(&outdir.join("distances.csv"), s)?;
    }
    if let Some(maps) = &artifacts.maps {
        let dir = outdir.join("maps");
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        let mut index = String::from("file,clip,window,label\n");
        for m in maps {
            let file = format!("{}.pgm", m.stem);
            write(&dir.join(&file), encode_pgm(&m.map))?;
            writeln!(index, "{file},{},{},{}", m.clip, m.window, m.label).unwrap();
        }
        write(&dir.join("index.csv"), index)?;
    }
    if let Some(ck) = &artifacts.checkpoint {
        ck.save(&outdir.join("model.json"))?;
    }
    Ok(())
}
