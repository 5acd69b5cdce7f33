//! Dataset bookkeeping: which clips exist, their labels and split tags.
//!
//! On disk a manifest is a CSV file with a `path,label` header (an optional
//! third `split` column is honoured). Paths are relative to the manifest.
//! Class order comes from an optional `# classes: a,b,c` first line and is
//! otherwise the sorted set of labels.

use std::path::{Path, PathBuf};

use hopfrc_core::audio::{stratified_split, synthesize, AudioClip, SplitTag, SynthSpec};

use crate::error::{HarnessError, Result};
use crate::wav::read_wav;

/// Rate synthetic clips are generated at.
pub const SYNTH_RATE: u32 = 4000;

#[derive(Debug, Clone, PartialEq)]
pub enum ClipSource {
    File(PathBuf),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub source: ClipSource,
    pub label: usize,
    pub split: SplitTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for e in &self.entries {
            counts[e.label] += 1;
        }
        counts
    }

    pub fn load_clip(&self, i: usize) -> Result<AudioClip> {
        match &self.entries[i].source {
            ClipSource::File(path) => {
                let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
                read_wav(&bytes)
            }
            ClipSource::Synth(spec) => Ok(synthesize(spec, SYNTH_RATE)?),
        }
    }

    /// Label of entry `i` as text, for file names and reports.
    pub fn describe(&self, i: usize) -> String {
        let e = &self.entries[i];
        match &e.source {
            ClipSource::File(p) => p.display().to_string(),
            ClipSource::Synth(_) => format!("{}-{i:04}", self.class_names[e.label]),
        }
    }
}

/// Parse manifest text; relative paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path, seed: u64) -> Result<DatasetManifest> {
    let err = |line: usize, message: String| HarnessError::Manifest { line, message };
    let declared: Option<Vec<String>> = text
        .lines()
        .next()
        .and_then(|l| l.trim().strip_prefix("# classes:"))
        .map(|rest| rest.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (path_col, label_col) = match (col("path"), col("label")) {
        (Some(p), Some(l)) => (p, l),
        _ => return Err(err(1, "header must name `path` and `label` columns".into())),
    };
    let split_col = col("split");

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let split = match split_col.map(field).as_deref() {
            None | Some("") | Some("unassigned") => SplitTag::Unassigned,
            Some("train") => SplitTag::Train,
            Some("test") => SplitTag::Test,
            Some(other) => return Err(err(line, format!("unknown split tag `{other}`"))),
        };
        rows.push((line, field(path_col), field(label_col), split));
    }

    let class_names = match declared {
        Some(names) => names,
        None => {
            let mut names: Vec<String> = rows.iter().map(|r| r.2.clone()).collect();
            names.sort();
            names.dedup();
            names
        }
    };
    let entries = rows
        .into_iter()
        .map(|(line, path, label, split)| {
            let label = class_names
                .iter()
                .position(|c| *c == label)
                .ok_or_else(|| err(line, format!("label `{label}` is not a declared class")))?;
            let path = PathBuf::from(path);
            let path = if path.is_relative() { base.join(path) } else { path };
            Ok(ManifestEntry {
                source: ClipSource::File(path),
                label,
                split,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DatasetManifest {
        entries,
        class_names,
        seed,
    })
}

pub fn read_manifest(path: &Path, seed: u64) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")), seed)
}

/// Stratified split of every entry; existing tags are overwritten.
pub fn split_dataset(manifest: &DatasetManifest, train_fraction: f64, seed: u64) -> Result<DatasetManifest> {
    let tags = stratified_split(&manifest.labels(), manifest.class_names.len(), train_fraction, seed)?;
    let mut out = manifest.clone();
    for (e, t) in out.entries.iter_mut().zip(tags) {
        e.split = t;
    }
    out.seed = seed;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_paths_labels_and_splits() {
        let text = "# classes: dog,siren\npath,label,split\na.wav,siren,train\n/abs/b.wav,dog,\n";
        let m = parse_manifest(text, Path::new("/data"), 1).unwrap();
        assert_eq!(m.class_names, vec!["dog", "siren"]);
        assert_eq!(m.entries[0].source, ClipSource::File("/data/a.wav".into()));
        assert_eq!((m.entries[0].label, m.entries[0].split), (1, SplitTag::Train));
        assert_eq!(m.entries[1].source, ClipSource::File("/abs/b.wav".into()));
        assert_eq!(m.entries[1].split, SplitTag::Unassigned);
    }

    #[test]
    fn classes_default_to_sorted_labels() {
        let m = parse_manifest("path,label\nx,b\ny,a\nz,b\n", Path::new("."), 0).unwrap();
        assert_eq!(m.class_names, vec!["a", "b"]);
        assert_eq!(m.labels(), vec![1, 0, 1]);
        assert_eq!(m.class_counts(), vec![1, 2]);
    }

    #[test]
    fn header_only_is_empty() {
        let m = parse_manifest("path,label\n", Path::new("."), 0).unwrap();
        assert!(m.entries.is_empty() && m.class_names.is_empty());
    }

    #[test]
    fn reports_bad_lines() {
        let e = parse_manifest("# classes: a\npath,label\nx,a\ny,b\n", Path::new("."), 0).unwrap_err();
        assert!(matches!(e, HarnessError::Manifest { line: 4, .. }), "{e}");
        assert!(parse_manifest("file,class\n", Path::new("."), 0).is_err());
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let text: String = std::iter::once("path,label\n".to_string())
            .chain((0..50).map(|i| format!("{i}.wav,{}\n", if i < 20 { "a" } else { "b" })))
            .collect();
        let m = parse_manifest(&text, Path::new("."), 0).unwrap();
        let s = split_dataset(&m, 0.8, 3).unwrap();
        let train = |c| s.entries.iter().filter(|e| e.label == c && e.split == SplitTag::Train).count();
        assert_eq!((train(0), train(1)), (16, 24));
        assert_eq!(s, split_dataset(&m, 0.8, 3).unwrap());
    }
}
