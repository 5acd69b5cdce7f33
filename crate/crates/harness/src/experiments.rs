//! The six studies: featurize, compare-mel, noise-sweep, classify,
//! reconfigure and mixed-signal.

use std::time::Instant;

use hopfrc_core::audio::{add_white_noise, synthesize, AudioClip, SplitTag};
use hopfrc_core::features::{euclidean_distance, normalized_distance, FeatureMap};
use hopfrc_core::readout::{build_model, evaluate, freeze_and_retrain_head, train, Layer, ReadoutModel, Tensor};
use hopfrc_core::rng::{seeded, streams};
use hopfrc_core::reservoir::AUDIO_RATE_HZ;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::{DatasetConfig, ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::manifest::{split_dataset, DatasetManifest};
use crate::pipeline::{prepare_windows, to_tensor, Featurizer};
use crate::report::{Artifacts, DistanceRow, ExperimentReport, MapFile};
use crate::suites::{mixed_scene, reference_siren};

fn featurizer(cfg: &ExperimentConfig) -> Featurizer {
    Featurizer {
        reservoir: cfg.reservoir,
        activation: cfg.activation,
        mel: cfg.mel,
    }
}

/// Windows cut from the selected manifest entries, in manifest order.
struct Windows {
    clips: Vec<(AudioClip, String)>,
    labels: Vec<usize>,
    entry: Vec<usize>,
    index: Vec<usize>,
}

fn windows_of(m: &DatasetManifest, keep: impl Fn(SplitTag) -> bool + Sync) -> Result<Windows> {
    let chosen: Vec<usize> = (0..m.entries.len()).filter(|&i| keep(m.entries[i].split)).collect();
    let per_entry: Vec<Vec<AudioClip>> = chosen
        .par_iter()
        .map(|&i| prepare_windows(&m.load_clip(i)?))
        .collect::<Result<_>>()?;
    let mut w = Windows {
        clips: Vec::new(),
        labels: Vec::new(),
        entry: Vec::new(),
        index: Vec::new(),
    };
    for (&i, wins) in chosen.iter().zip(per_entry) {
        for (k, clip) in wins.into_iter().enumerate() {
            w.clips.push((clip, format!("{}#{k}", m.describe(i))));
            w.labels.push(m.entries[i].label);
            w.entry.push(i);
            w.index.push(k);
        }
    }
    Ok(w)
}

fn tensors(fz: &Featurizer, w: &Windows) -> Result<Vec<Tensor>> {
    Ok(fz.hopf_all(&w.clips)?.iter().map(to_tensor).collect())
}

fn first_window(clip: &AudioClip) -> Result<AudioClip> {
    prepare_windows(clip)?
        .into_iter()
        .next()
        .ok_or_else(|| HarnessError::Config("signal is empty".into()))
}

fn row(label: impl Into<String>, hopf: (&FeatureMap, &FeatureMap), mel: Option<(&FeatureMap, &FeatureMap)>) -> Result<DistanceRow> {
    Ok(DistanceRow {
        label: label.into(),
        hopf: euclidean_distance(hopf.0, hopf.1)?,
        hopf_normalized: normalized_distance(hopf.0, hopf.1)?,
        mel: mel.map(|(a, b)| euclidean_distance(a, b)).transpose()?,
        mel_normalized: mel.map(|(a, b)| normalized_distance(a, b)).transpose()?,
    })
}

pub fn run_featurize(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    let fz = featurizer(cfg);
    let m = cfg.dataset.load(cfg.seed)?;
    let w = windows_of(&m, |_| true)?;
    let maps = fz.hopf_all(&w.clips)?;
    let files = maps
        .into_iter()
        .enumerate()
        .map(|(k, map)| {
            let label = m.class_names[w.labels[k]].clone();
            MapFile {
                stem: format!("{:04}_{label}_w{}", w.entry[k], w.index[k]),
                clip: m.describe(w.entry[k]),
                window: w.index[k],
                label,
                map,
            }
        })
        .collect::<Vec<_>>();
    let mut report = ExperimentReport::new(ExperimentKind::Featurize, cfg);
    report.class_names = m.class_names.clone();
    report.set("clips", m.entries.len());
    report.set("maps", files.len());
    if let Some(f) = files.first() {
        report.set("map_rows", f.map.rows);
        report.set("map_cols", f.map.cols);
    }
    Ok((
        report,
        Artifacts {
            maps: Some(files),
            ..Artifacts::default()
        },
    ))
}

pub fn run_compare_mel(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    let c = &cfg.compare;
    let names = c.suite.class_names();
    if c.class >= names.len() || c.other_class >= names.len() {
        return Err(HarnessError::Config(format!("suite {:?} has {} classes", c.suite, names.len())));
    }
    let fz = featurizer(cfg);
    let mut rng = seeded(cfg.seed, streams::SYNTH);
    let mut specs: Vec<_> = (0..=c.variants).map(|_| c.suite.clip(c.class, &mut rng)).collect();
    specs.push(c.suite.clip(c.other_class, &mut rng));
    let windows = specs
        .iter()
        .map(|s| first_window(&synthesize(s, AUDIO_RATE_HZ)?))
        .collect::<Result<Vec<_>>>()?;
    let maps: Vec<(FeatureMap, FeatureMap)> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| Ok((fz.hopf(w, &format!("clip-{i}"))?, fz.mel(w, &format!("clip-{i}"))?)))
        .collect::<Result<_>>()?;

    let (rh, rm) = &maps[0];
    let mut report = ExperimentReport::new(ExperimentKind::CompareMel, cfg);
    report.class_names = vec![names[c.class].to_string(), names[c.other_class].to_string()];
    report.distances.push(row("reference", (rh, rh), Some((rm, rm)))?);
    for (k, (h, m)) in maps[1..=c.variants].iter().enumerate() {
        report.distances.push(row(format!("variant-{}", k + 1), (rh, h), Some((rm, m)))?);
    }
    let (oh, om) = &maps[c.variants + 1];
    report.distances.push(row("other-class", (rh, oh), Some((rm, om)))?);

    let within = &report.distances[1..=c.variants];
    let hopf_within = within.iter().map(|d| d.hopf_normalized).fold(0.0, f64::max);
    let cross = report.distances[c.variants + 1].hopf_normalized;
    report.set("hopf_below_mel_within_class", within.iter().all(|d| Some(d.hopf_normalized) < d.mel_normalized));
    report.set("hopf_cross_exceeds_within", cross > hopf_within);
    Ok((report, Artifacts::default()))
}

pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    let fz = featurizer(cfg);
    let spec = cfg.noise_sweep.signal.clone().unwrap_or_else(|| reference_siren(1.0));
    let clean = first_window(&synthesize(&spec, AUDIO_RATE_HZ)?)?;
    let clean_maps = (fz.hopf(&clean, "clean")?, fz.mel(&clean, "clean")?);
    let snrs = &cfg.noise_sweep.snr_db;
    let rows: Vec<DistanceRow> = snrs
        .par_iter()
        .map(|&snr| {
            // Both feature spaces see the same noisy clip.
            let noisy = add_white_noise(&clean, snr, cfg.seed)?;
            let label = format!("snr={snr}");
            let h = fz.hopf(&noisy, &label)?;
            let m = fz.mel(&noisy, &label)?;
            row(label, (&clean_maps.0, &h), Some((&clean_maps.1, &m)))
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(ExperimentKind::NoiseSweep, cfg);
    let mut by_snr: Vec<(f64, &DistanceRow)> = snrs.iter().copied().zip(&rows).collect();
    by_snr.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = |f: fn(&DistanceRow) -> f64| by_snr.windows(2).all(|p| f(p[1].1) <= f(p[0].1));
    report.set("hopf_monotone_in_snr", monotone(|d| d.hopf_normalized));
    report.set("mel_monotone_in_snr", monotone(|d| d.mel_normalized.unwrap_or(0.0)));
    report.set(
        "hopf_below_mel_at_all_snr",
        rows.iter().zip(snrs).all(|(d, s)| s.is_infinite() || Some(d.hopf_normalized) < d.mel_normalized),
    );
    report.distances = rows;
    Ok((report, Artifacts::default()))
}

type SplitFeatures = (DatasetManifest, Windows, Vec<Tensor>, Windows, Vec<Tensor>);

/// Split `dataset`, featurize both halves and return `(manifest, train, test)`.
fn split_features(cfg: &ExperimentConfig, dataset: &DatasetConfig) -> Result<SplitFeatures> {
    let fz = featurizer(cfg);
    let m = split_dataset(&dataset.load(cfg.seed)?, dataset.train_fraction, cfg.seed)?;
    let train_w = windows_of(&m, |t| t == SplitTag::Train)?;
    let test_w = windows_of(&m, |t| t == SplitTag::Test)?;
    let train_x = tensors(&fz, &train_w)?;
    let test_x = tensors(&fz, &test_w)?;
    Ok((m, train_w, train_x, test_w, test_x))
}

fn train_on(cfg: &ExperimentConfig, dataset: &DatasetConfig, report: &mut ExperimentReport) -> Result<(ReadoutModel, DatasetManifest)> {
    let (m, train_w, train_x, test_w, test_x) = split_features(cfg, dataset)?;
    let n_classes = m.class_names.len();
    if train_x.is_empty() {
        return Err(HarnessError::Config("training split is empty".into()));
    }
    if n_classes == 1 {
        report.warnings.push("single-class dataset: the split is degenerate and accuracy is trivially 1".into());
    }
    let mut model = build_model(&cfg.architecture, n_classes, cfg.seed)?;
    report.loss_history = train(&mut model, &train_x, &train_w.labels, &cfg.train.with_seed(cfg.seed))?;
    report.class_names = m.class_names.clone();
    report.n_train = Some(train_x.len());
    report.set_confusion(evaluate(&model, &test_x, &test_w.labels)?.confusion);
    Ok((model, m))
}

pub fn run_classify(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    let mut report = ExperimentReport::new(ExperimentKind::Classify, cfg);
    let (model, m) = train_on(cfg, &cfg.dataset, &mut report)?;
    report.published_target = cfg.dataset.published_target;
    report.trainable_parameters = Some(model.trainable_parameter_count());
    Ok((
        report,
        Artifacts {
            checkpoint: Some(Checkpoint::new(model, m.class_names)),
            ..Artifacts::default()
        },
    ))
}

/// Head size after the flatten layer of `model` when rebuilt for `n_classes`.
fn head_parameter_closed_form(model: &ReadoutModel, n_classes: usize) -> Option<usize> {
    let flatten = model.layers.iter().position(|l| matches!(l, Layer::Flatten))?;
    let flat: usize = model.layers[..=flatten]
        .iter()
        .try_fold(model.input, |s, l| match l {
            Layer::Conv(c) => Some(hopfrc_core::readout::Shape::new(s.rows, s.cols, c.out_ch)),
            Layer::MaxPool => Some(hopfrc_core::readout::Shape::new(s.rows / 2, s.cols / 2, s.channels)),
            Layer::Flatten => Some(hopfrc_core::readout::Shape::flat(s.len())),
            Layer::Dense(_) => None,
        })?
        .len();
    let widths: Vec<usize> = model.layers[flatten + 1..]
        .iter()
        .filter_map(|l| match l {
            Layer::Dense(d) => Some(d.outputs),
            _ => None,
        })
        .collect();
    let (_, hidden) = widths.split_last()?;
    let mut width = flat;
    let mut total = 0;
    for &h in hidden.iter().chain([&n_classes]) {
        total += width * h + h;
        width = h;
    }
    Some(total)
}

fn conv_params(model: &ReadoutModel) -> Vec<(Vec<f64>, Vec<f64>)> {
    model
        .layers
        .iter()
        .filter_map(|l| match l {
            Layer::Conv(c) => Some((c.weights.clone(), c.bias.clone())),
            _ => None,
        })
        .collect()
}

pub fn run_reconfigure(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    let rc = &cfg.reconfigure;
    let mut report = ExperimentReport::new(ExperimentKind::Reconfigure, cfg);
    let mut model = match &rc.base_checkpoint {
        Some(path) => Checkpoint::load(path)?.model,
        None => {
            let mut base = ExperimentReport::new(ExperimentKind::Classify, cfg);
            let (model, _) = train_on(cfg, &rc.base, &mut base)?;
            report.set("base_accuracy", base.accuracy.unwrap_or(0.0));
            model
        }
    };

    let (m, train_w, train_x, test_w, test_x) = split_features(cfg, &rc.task)?;
    let n_classes = m.class_names.len();
    let before = conv_params(&model);
    let mut train_cfg = cfg.train.with_seed(cfg.seed);
    train_cfg.epochs = rc.epochs;
    let head = freeze_and_retrain_head(&mut model, &train_x, &train_w.labels, n_classes, &train_cfg)?;

    report.class_names = m.class_names.clone();
    report.n_train = Some(train_x.len());
    report.loss_history = head.loss_history;
    report.trainable_parameters = Some(head.trainable_parameters);
    report.published_target = rc.task.published_target;
    report.set_confusion(evaluate(&model, &test_x, &test_w.labels)?.confusion);
    report.set("conv_unchanged", conv_params(&model) == before);
    if let Some(n) = head_parameter_closed_form(&model, n_classes) {
        report.set("head_parameters_closed_form", n);
    }
    Ok((
        report,
        Artifacts {
            checkpoint: Some(Checkpoint::new(model, m.class_names)),
            ..Artifacts::default()
        },
    ))
}

pub fn run_mixed_signal(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    let fz = featurizer(cfg);
    let reference = fz.hopf(&first_window(&synthesize(&reference_siren(1.0), AUDIO_RATE_HZ)?)?, "reference")?;
    let window_distances = |gain: f64| -> Result<Vec<(FeatureMap, DistanceRow)>> {
        let scene = synthesize(&mixed_scene(gain), AUDIO_RATE_HZ)?;
        prepare_windows(&scene)?
            .par_iter()
            .enumerate()
            .map(|(k, w)| {
                let label = format!("window-{}", k + 1);
                let map = fz.hopf(w, &label)?;
                let r = row(label, (&reference, &map), None)?;
                Ok((map, r))
            })
            .collect()
    };
    let mean = |rows: &[DistanceRow]| rows.iter().map(|r| r.hopf).sum::<f64>() / rows.len().max(1) as f64;

    let mut report = ExperimentReport::new(ExperimentKind::MixedSignal, cfg);
    let main = window_distances(cfg.mixed.dominant_gain)?;
    report.distances.push(row("reference", (&reference, &reference), None)?);
    let rows: Vec<DistanceRow> = main.iter().map(|(_, r)| r.clone()).collect();
    let (first, second) = rows.split_at(rows.len() / 2);
    report.set("mean_first_half", mean(first));
    report.set("mean_second_half", mean(second));
    report.set("second_half_closer", first.iter().map(|r| r.hopf).fold(f64::INFINITY, f64::min) > second.iter().map(|r| r.hopf).fold(0.0, f64::max));
    report.distances.extend(rows);

    let mut sweep = Vec::new();
    for &g in &cfg.mixed.gain_sweep {
        let rows: Vec<DistanceRow> = window_distances(g)?.into_iter().map(|(_, r)| r).collect();
        let m = mean(&rows[rows.len() / 2..]);
        report.set(&format!("mean_second_half_gain_{g}"), m);
        sweep.push((g, m));
    }
    sweep.sort_by(|a, b| a.0.total_cmp(&b.0));
    report.set("second_half_distance_falls_with_gain", sweep.windows(2).all(|p| p[1].1 < p[0].1));

    let maps = main
        .into_iter()
        .enumerate()
        .map(|(k, (map, _))| MapFile {
            stem: format!("window_{}", k + 1),
            clip: "mixed-scene".into(),
            window: k,
            label: if k < 4 { "background".into() } else { "dominant".into() },
            map,
        })
        .collect();
    Ok((
        report,
        Artifacts {
            maps: Some(maps),
            ..Artifacts::default()
        },
    ))
}

/// Run one experiment and time it.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<(ExperimentReport, Artifacts)> {
    cfg.validate()?;
    let start = Instant::now();
    let (report, mut artifacts) = match kind {
        ExperimentKind::Featurize => run_featurize(cfg),
        ExperimentKind::CompareMel => run_compare_mel(cfg),
        ExperimentKind::NoiseSweep => run_noise_sweep(cfg),
        ExperimentKind::Classify => run_classify(cfg),
        ExperimentKind::Reconfigure => run_reconfigure(cfg),
        ExperimentKind::MixedSignal => run_mixed_signal(cfg),
    }?;
    artifacts.wall_clock_s = start.elapsed().as_secs_f64();
    Ok((report, artifacts))
}
