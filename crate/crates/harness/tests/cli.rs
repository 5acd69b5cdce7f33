use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hopfrc::wav::write_wav_pcm16;
use hopfrc_core::audio::{normalize, synthesize, SynthKind, SynthSpec};
use serde_json::Value;
use tempfile::TempDir;

fn hopfrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopfrc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hopfrc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("metrics.json")).unwrap()).unwrap()
}

fn tone_wav(dir: &Path, name: &str, hz: f64) {
    let spec = SynthSpec::new(SynthKind::Tone { freq_hz: hz, phase: 0.0 }, 1.0, 0);
    let clip = normalize(&synthesize(&spec, 8000).unwrap()).unwrap();
    fs::write(dir.join(name), write_wav_pcm16(&clip)).unwrap();
}

fn pgm_dims(bytes: &[u8]) -> (usize, usize) {
    let text = String::from_utf8_lossy(&bytes[..20]);
    let mut it = text.split_whitespace().skip(1);
    let w = it.next().unwrap().parse().unwrap();
    let h = it.next().unwrap().parse().unwrap();
    (w, h)
}

#[test]
fn featurize_gallery_writes_ten_maps_deterministically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[dataset]\nsuite = \"gallery\"\nclips_per_class = 1\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&["featurize", "--config", &cfg, "--out", out.to_str().unwrap(), "--single-thread"]);
    }
    let index = fs::read_to_string(a.join("maps/index.csv")).unwrap();
    let files: Vec<&str> = index.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(files.len(), 10);
    for f in &files {
        let bytes = fs::read(a.join("maps").join(f)).unwrap();
        assert_eq!(pgm_dims(&bytes), (100, 200), "{f}");
        assert_eq!(bytes, fs::read(b.join("maps").join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read(a.join("metrics.json")).unwrap(), fs::read(b.join("metrics.json")).unwrap());
}

#[test]
fn empty_manifest_gives_empty_index() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("empty.csv"), "path,label\n").unwrap();
    let cfg = write_config(tmp.path(), "[dataset]\nmanifest = \"empty.csv\"\n");
    let out = tmp.path().join("out");
    ok(&["featurize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(out.join("maps/index.csv")).unwrap(), "file,clip,window,label\n");
    assert_eq!(metrics(&out)["values"]["maps"], 0);
}

#[test]
fn compare_mel_reference_row_is_zero() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("cmp");
    ok(&["compare-mel", "--out", out.to_str().unwrap()]);
    let m = metrics(&out);
    let reference = &m["distances"][0];
    assert_eq!(reference["label"], "reference");
    assert_eq!(reference["hopf"], 0.0);
    assert_eq!(reference["mel"], 0.0);
    assert_eq!(m["distances"].as_array().unwrap().len(), 5);
}

#[test]
fn noise_sweep_without_noise_is_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[noise_sweep]\nsnr_db = [inf, 20.0]\n");
    let out = tmp.path().join("ns");
    ok(&["noise-sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("distances.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "snr=inf,0,0,0,0");
}

#[test]
fn mixed_signal_reference_is_zero_and_maps_are_written() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mixed");
    ok(&["mixed-signal", "--out", out.to_str().unwrap()]);
    let m = metrics(&out);
    assert_eq!(m["distances"][0]["hopf"], 0.0);
    assert_eq!(m["distances"].as_array().unwrap().len(), 9);
    assert_eq!(m["values"]["second_half_closer"], true);
    assert_eq!(fs::read_to_string(out.join("maps/index.csv")).unwrap().lines().count(), 9);
}

#[test]
fn classify_gallery_reports_ten_by_ten_confusion_and_reconfigures() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 3\n[train]\nepochs = 1\n[dataset]\nsuite = \"gallery\"\nclips_per_class = 5\n",
    );
    let out = tmp.path().join("deep/nested/classify");
    ok(&["classify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("confusion.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.split(',').count() == 11));
    let m = metrics(&out);
    assert_eq!(m["n_test"], 10);
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);

    let rc = write_config(
        tmp.path(),
        &format!(
            "[reconfigure]\nepochs = 1\nbase_checkpoint = {:?}\n[reconfigure.task]\nsuite = \"sounds-b\"\nclips_per_class = 5\n",
            out.join("model.json")
        ),
    );
    let out2 = tmp.path().join("reconfigure");
    ok(&["reconfigure", "--config", &rc, "--out", out2.to_str().unwrap()]);
    let m = metrics(&out2);
    assert_eq!(m["values"]["conv_unchanged"], true);
    assert_eq!(m["trainable_parameters"], 36_948);
    assert_eq!(m["values"]["head_parameters_closed_form"], 36_948);
}

#[test]
fn single_class_manifest_warns() {
    let tmp = TempDir::new().unwrap();
    let mut manifest = String::from("path,label\n");
    for (i, hz) in [300.0, 500.0, 700.0, 900.0, 1100.0].into_iter().enumerate() {
        let name = format!("tone{i}.wav");
        tone_wav(tmp.path(), &name, hz);
        manifest.push_str(&format!("{name},tone\n"));
    }
    fs::write(tmp.path().join("m.csv"), manifest).unwrap();
    let cfg = write_config(tmp.path(), "[train]\nepochs = 1\n[dataset]\nmanifest = \"m.csv\"\n");
    let out = tmp.path().join("one");
    let run = ok(&["classify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&run.stderr).contains("single-class"));
    let m = metrics(&out);
    assert_eq!(m["accuracy"], 1.0);
    assert_eq!(m["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| {
        let out = hopfrc(args);
        (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
    };

    let bad_key = write_config(tmp.path(), "sead = 1\n");
    let (c, err) = code(&["noise-sweep", "--config", &bad_key]);
    assert_eq!(c, Some(2));
    assert!(err.starts_with("error[config]"), "{err}");

    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&["noise-sweep", "--config", missing.to_str().unwrap()]).0, Some(3));

    fs::write(tmp.path().join("bad.csv"), "path,label,split\nx.wav,a,sometimes\n").unwrap();
    let cfg = write_config(tmp.path(), "[dataset]\nmanifest = \"bad.csv\"\n");
    assert_eq!(code(&["featurize", "--config", &cfg]).0, Some(4));

    fs::write(tmp.path().join("blocker"), "").unwrap();
    let out = tmp.path().join("blocker/out");
    let (c, err) = code(&["noise-sweep", "--out", out.to_str().unwrap()]);
    assert_eq!(c, Some(3));
    assert!(err.starts_with("error[io]"), "{err}");

    assert_eq!(code(&["classify", "--seed", "x"]).0, Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        hopfrc::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 4);
}
