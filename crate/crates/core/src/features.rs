//! Feature maps: reservoir responses and Mel spectra rendered as `[0, 1]`
//! grids, and distances between them.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::audio::AudioClip;
use crate::error::{contract, Result};
use crate::fft::magnitude_spectrum;
use crate::reservoir::ReservoirResponse;

/// Audio rows per one-second reservoir response.
pub const RESPONSE_ROWS: usize = 4000;
/// Every `SKIP`-th response row is kept.
pub const SKIP: usize = 20;
/// Rows of a reservoir feature map.
pub const MAP_ROWS: usize = RESPONSE_ROWS / SKIP;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MapKind {
    /// Rows are time, columns are virtual nodes.
    HopfVirtualNodes,
    /// Rows are frames, columns are Mel bands.
    MelBands,
}

/// Row-major grid of values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub data: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub kind: MapKind,
    pub source: String,
}

impl FeatureMap {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ActivationConfig {
    pub apply_atanh: bool,
    /// Scaled values are clamped to `±(1 - clamp_margin)` before `atanh`.
    pub clamp_margin: f64,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            apply_atanh: true,
            clamp_margin: 1e-3,
        }
    }
}

impl ActivationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clamp_margin > 0.0 && self.clamp_margin < 1.0) {
            return Err(contract!("clamp margin {} outside (0, 1)", self.clamp_margin));
        }
        Ok(())
    }
}

/// Scale by the peak magnitude, clamp to `±(1 - ε)` and apply `atanh`.
///
/// With `apply_atanh = false` only the peak scaling is applied. An all-zero
/// matrix is returned as is.
pub fn atanh_activate(matrix: &[f64], cfg: &ActivationConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::NumericDomain("matrix has non-finite entries".into()));
    }
    let peak = matrix.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(matrix.to_vec());
    }
    let limit = 1.0 - cfg.clamp_margin;
    Ok(matrix
        .iter()
        .map(|v| {
            let s = v / peak;
            if cfg.apply_atanh {
                libm::atanh(s.clamp(-limit, limit))
            } else {
                s
            }
        })
        .collect())
}

/// Affine map of `data` onto `[0, 1]` over the whole grid; a constant grid
/// becomes all `0.5`.
pub fn min_max_rescale(data: &mut [f64]) {
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        data.iter_mut().for_each(|v| *v = 0.5);
        return;
    }
    let span = hi - lo;
    data.iter_mut().for_each(|v| *v = (*v - lo) / span);
}

/// Turn a one-second reservoir response into a `200 x N` feature map.
///
/// The response is activated, every [`SKIP`]-th row is kept and the kept
/// rows are min-max rescaled to `[0, 1]` as one grid.
pub fn assemble_feature_map(
    resp: &ReservoirResponse,
    cfg: &ActivationConfig,
    source: impl Into<String>,
) -> Result<FeatureMap> {
    if resp.rows != RESPONSE_ROWS {
        return Err(contract!(
            "feature maps need {RESPONSE_ROWS} response rows (1 s at 4000 Hz), got {}",
            resp.rows
        ));
    }
    let activated = atanh_activate(&resp.matrix, cfg)?;
    let cols = resp.cols;
    let mut data = Vec::with_capacity(MAP_ROWS * cols);
    for r in (0..resp.rows).step_by(SKIP) {
        data.extend_from_slice(&activated[r * cols..(r + 1) * cols]);
    }
    min_max_rescale(&mut data);
    Ok(FeatureMap {
        data,
        rows: MAP_ROWS,
        cols,
        kind: MapKind::HopfVirtualNodes,
        source: source.into(),
    })
}

/// HTK-style Mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular Mel filterbank over the `n_fft / 2 + 1` bins of an `n_fft`
/// transform at `rate`, spanning 0 Hz to Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_bands` rows of `n_bins` weights.
    pub weights: Vec<Vec<f64>>,
    /// Peak frequency of each filter.
    pub centers_hz: Vec<f64>,
    pub n_bins: usize,
}

impl MelFilterbank {
    pub fn new(n_bands: usize, n_fft: usize, rate: u32) -> Result<Self> {
        if n_bands == 0 {
            return Err(contract!("filterbank needs at least one band"));
        }
        let n_bins = n_fft / 2 + 1;
        let nyquist = rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_bands + 1) as f64))
            .collect();
        let bin_hz = rate as f64 / n_fft as f64;
        let mut weights = Vec::with_capacity(n_bands);
        for m in 0..n_bands {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut w: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            // A filter narrower than the bin spacing still gets its nearest bin.
            if w.iter().all(|&v| v == 0.0) {
                let k = libm::round(mid / bin_hz) as usize;
                w[k.min(n_bins - 1)] = 1.0;
            }
            weights.push(w);
        }
        Ok(Self {
            weights,
            centers_hz: edges[1..=n_bands].to_vec(),
            n_bins,
        })
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Mel spectrogram settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MelConfig {
    pub n_bands: usize,
    /// Frame length and hop, seconds (frames do not overlap).
    pub hop: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_bands: 100,
            hop: 0.025,
        }
    }
}

/// Floor added to band energies before the logarithm.
const LOG_FLOOR: f64 = 1e-10;

/// Log-Mel spectrogram rescaled to `[0, 1]`: one row per non-overlapping
/// Hann-windowed frame, one column per band.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &MelConfig, source: impl Into<String>) -> Result<FeatureMap> {
    let frame = libm::round(cfg.hop * clip.rate as f64) as usize;
    if frame == 0 || clip.len() < frame {
        return Err(contract!(
            "clip of {} samples is shorter than one {} s frame",
            clip.len(),
            cfg.hop
        ));
    }
    // Zero-pad so the narrowest low-frequency filters still span whole bins.
    let n_fft = (4 * frame).next_power_of_two();
    let bank = MelFilterbank::new(cfg.n_bands, n_fft, clip.rate)?;
    let window: Vec<f64> = (0..frame)
        .map(|i| {
            0.5 - 0.5 * libm::cos(2.0 * core::f64::consts::PI * i as f64 / (frame - 1).max(1) as f64)
        })
        .collect();
    let n_frames = clip.len() / frame;
    let mut data = Vec::with_capacity(n_frames * cfg.n_bands);
    let mut buf = vec![0.0; frame];
    for f in 0..n_frames {
        let chunk = &clip.samples[f * frame..(f + 1) * frame];
        for ((b, s), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = s * w;
        }
        let power: Vec<f64> = magnitude_spectrum(&buf, n_fft)?.iter().map(|m| m * m).collect();
        data.extend(bank.apply(&power).into_iter().map(|e| libm::log(e + LOG_FLOOR)));
    }
    min_max_rescale(&mut data);
    Ok(FeatureMap {
        data,
        rows: n_frames,
        cols: cfg.n_bands,
        kind: MapKind::MelBands,
        source: source.into(),
    })
}

/// Frobenius norm of `a - b`.
pub fn euclidean_distance(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(contract!(
            "shape mismatch: {}x{} vs {}x{}",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        ));
    }
    Ok(libm::sqrt(
        a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum(),
    ))
}

/// Distance divided by `sqrt(cells)`, so maps of different sizes compare.
pub fn normalized_distance(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    Ok(euclidean_distance(a, b)? / libm::sqrt(a.cells() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::HopfParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn response(matrix: Vec<f64>, rows: usize, cols: usize) -> ReservoirResponse {
        ReservoirResponse {
            matrix,
            rows,
            cols,
            audio_rate: 4000,
            params_used: HopfParams::default(),
        }
    }

    fn map(data: Vec<f64>, rows: usize, cols: usize) -> FeatureMap {
        FeatureMap {
            data,
            rows,
            cols,
            kind: MapKind::HopfVirtualNodes,
            source: String::new(),
        }
    }

    /// atanh(x) = x + x^3/3 + x^5/5 + ... summed until terms vanish.
    fn atanh_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut p = x;
        let mut k = 1.0;
        while p.abs() > 1e-18 {
            sum += p / k;
            p *= x * x;
            k += 2.0;
        }
        sum
    }

    #[test]
    fn activation_reference_values() {
        let cfg = ActivationConfig::default();
        let out = atanh_activate(&[0.0, 0.5, 1.0, -1.0], &cfg).unwrap();
        assert_eq!(out[0], 0.0);
        assert_abs_diff_eq!(out[1], atanh_series(0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 0.549_306_144_334_054_8, epsilon = 1e-12);
        // 0.999 = 1 - margin: atanh(0.999) = ln(1999) / 2.
        assert_abs_diff_eq!(out[2], 0.5 * libm::log(1999.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out[2], 3.8002, epsilon = 1e-4);
        assert_eq!(out[3], -out[2]);
    }

    #[test]
    fn activation_passthrough_and_zero() {
        let cfg = ActivationConfig {
            apply_atanh: false,
            ..Default::default()
        };
        assert_eq!(atanh_activate(&[2.0, -4.0], &cfg).unwrap(), vec![0.5, -1.0]);
        let zeros = vec![0.0; 6];
        assert_eq!(atanh_activate(&zeros, &ActivationConfig::default()).unwrap(), zeros);
        let bad = ActivationConfig {
            clamp_margin: 1.5,
            ..Default::default()
        };
        assert!(atanh_activate(&[1.0], &bad).is_err());
    }

    #[test]
    fn assemble_shape_and_range() {
        let rows = RESPONSE_ROWS;
        let cols = 100;
        let m: Vec<f64> = (0..rows * cols)
            .map(|i| libm::sin(i as f64 * 0.013) * (1.0 + (i / cols) as f64 / rows as f64))
            .collect();
        let fm = assemble_feature_map(&response(m, rows, cols), &ActivationConfig::default(), "x").unwrap();
        assert_eq!((fm.rows, fm.cols), (200, 100));
        assert_eq!(fm.min(), 0.0);
        assert_eq!(fm.max(), 1.0);
    }

    #[test]
    fn assemble_constant_is_half() {
        let fm = assemble_feature_map(
            &response(vec![0.3; RESPONSE_ROWS * 10], RESPONSE_ROWS, 10),
            &ActivationConfig::default(),
            "c",
        )
        .unwrap();
        assert!(fm.data.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn assemble_keeps_every_twentieth_row() {
        let cols = 3;
        // Row r holds the value r in every column; activation off keeps order.
        let m: Vec<f64> = (0..RESPONSE_ROWS).flat_map(|r| [r as f64; 3]).collect();
        let cfg = ActivationConfig {
            apply_atanh: false,
            ..Default::default()
        };
        let fm = assemble_feature_map(&response(m, RESPONSE_ROWS, cols), &cfg, "r").unwrap();
        let last = (RESPONSE_ROWS - SKIP) as f64;
        for i in 0..fm.rows {
            assert_abs_diff_eq!(fm.row(i)[0], (SKIP * i) as f64 / last, epsilon = 1e-15);
        }
    }

    #[test]
    fn assemble_rejects_wrong_length() {
        let err = assemble_feature_map(&response(vec![0.0; 100], 10, 10), &ActivationConfig::default(), "");
        assert!(err.is_err());
    }

    #[test]
    fn mel_anchors() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let m = hz_to_mel(1000.0);
        assert!((m - 1000.0).abs() / 1000.0 < 1e-3, "{m}");
        assert_abs_diff_eq!(mel_to_hz(hz_to_mel(1234.5)), 1234.5, epsilon = 1e-9);
    }

    #[test]
    fn filterbank_geometry() {
        for (rate, n_fft) in [(4000, 512), (44100, 8192), (4000, 128)] {
            let bank = MelFilterbank::new(100, n_fft, rate).unwrap();
            assert!(bank.centers_hz.windows(2).all(|w| w[1] > w[0]));
            for w in &bank.weights {
                assert!(w.iter().all(|&v| v >= 0.0));
                assert!(w.iter().any(|&v| v > 0.0));
                // Unimodal: non-decreasing up to the peak, non-increasing after.
                let peak = w.iter().enumerate().fold(0, |b, (i, &v)| if v > w[b] { i } else { b });
                assert!(w[..=peak].windows(2).all(|p| p[1] >= p[0]));
                assert!(w[peak..].windows(2).all(|p| p[1] <= p[0]));
            }
            if n_fft >= 512 {
                for pair in bank.weights.windows(2) {
                    assert!(pair[0].iter().zip(&pair[1]).any(|(a, b)| *a > 0.0 && *b > 0.0));
                }
            }
        }
    }

    #[test]
    fn mel_tone_concentrates_in_one_band() {
        let rate = 4000;
        let clip = AudioClip::new(
            (0..rate)
                .map(|i| libm::sin(2.0 * core::f64::consts::PI * 700.0 * i as f64 / rate as f64))
                .collect(),
            rate as u32,
        );
        let fm = mel_spectrogram(&clip, &MelConfig::default(), "tone").unwrap();
        assert_eq!((fm.rows, fm.cols), (40, 100));
        let bank = MelFilterbank::new(100, 512, 4000).unwrap();
        let nearest = bank
            .centers_hz
            .iter()
            .enumerate()
            .fold(0, |b, (i, &c)| if (c - 700.0).abs() < (bank.centers_hz[b] - 700.0).abs() { i } else { b });
        for r in 0..fm.rows {
            let row = fm.row(r);
            let arg = row.iter().enumerate().fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
            assert!(arg.abs_diff(nearest) <= 1, "frame {r}: band {arg} vs {nearest}");
        }
        assert!(mel_spectrogram(&AudioClip::new(vec![0.0; 50], 4000), &MelConfig::default(), "").is_err());
    }

    #[test]
    fn distance_basics() {
        let a = map(vec![0.0, 0.0], 1, 2);
        let b = map(vec![0.6, 0.8], 1, 2);
        assert_abs_diff_eq!(euclidean_distance(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(euclidean_distance(&b, &b).unwrap(), 0.0);
        assert!(euclidean_distance(&a, &map(vec![0.0; 3], 1, 3)).is_err());
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(v in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..64)) {
            let a = map(v.iter().map(|p| p.0).collect(), 1, v.len());
            let b = map(v.iter().map(|p| p.1).collect(), 1, v.len());
            let d = euclidean_distance(&a, &b).unwrap();
            prop_assert_eq!(d, euclidean_distance(&b, &a).unwrap());
            prop_assert!(d <= libm::sqrt(v.len() as f64) + 1e-12);
        }

        #[test]
        fn activation_odd_and_monotone(v in proptest::collection::vec(-5.0f64..5.0, 2..40)) {
            let cfg = ActivationConfig::default();
            let pos = atanh_activate(&v, &cfg).unwrap();
            let neg_in: Vec<f64> = v.iter().map(|x| -x).collect();
            let neg = atanh_activate(&neg_in, &cfg).unwrap();
            for (p, n) in pos.iter().zip(&neg) {
                prop_assert_eq!(*p, -*n);
            }
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(pos[i] <= pos[j]);
                    }
                }
            }
        }
    }
}
