//! Clip preprocessing, calibrated noise, synthesis and dataset splits.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{contract, Error, Result};
use crate::fft::{fft_in_place, Complex};
use crate::rng::{seeded, streams};

/// Mono audio at an integer sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub rate: u32,
    /// Set once [`normalize`] has peak-scaled the clip into [-1, 1].
    pub normalized: bool,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, rate: u32) -> Self {
        Self {
            samples,
            rate,
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Mean of the squared samples.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Peak-normalize into [-1, 1]. Silence passes through unchanged.
pub fn normalize(clip: &AudioClip) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(contract!("cannot normalize an empty clip"));
    }
    let peak = clip.peak();
    if !peak.is_finite() {
        return Err(Error::NumericDomain("clip contains non-finite samples".into()));
    }
    let samples = if peak > 0.0 {
        clip.samples.iter().map(|v| v / peak).collect()
    } else {
        clip.samples.clone()
    };
    Ok(AudioClip {
        samples,
        rate: clip.rate,
        normalized: true,
    })
}

/// Anti-alias cutoff as a fraction of the target rate.
pub const RESAMPLE_CUTOFF: f64 = 0.45;
/// Length of the anti-alias kernel, in target-rate sample periods.
pub const RESAMPLE_SPAN: usize = 127;

fn blackman(i: usize, len: usize) -> f64 {
    let a = 2.0 * core::f64::consts::PI * i as f64 / (len - 1) as f64;
    0.42 - 0.5 * libm::cos(a) + 0.08 * libm::cos(2.0 * a)
}

/// Blackman-windowed sinc low-pass at `cutoff_hz` for sample rate `rate`,
/// `taps` long (odd), normalized to unit DC gain.
pub fn lowpass_kernel(cutoff_hz: f64, rate: f64, taps: usize) -> Vec<f64> {
    let fc = cutoff_hz / rate;
    let mid = (taps / 2) as f64;
    let mut k: Vec<f64> = (0..taps)
        .map(|i| {
            let m = i as f64 - mid;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                libm::sin(2.0 * core::f64::consts::PI * fc * m) / (core::f64::consts::PI * m)
            };
            sinc * blackman(i, taps)
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Downsample to `target_rate`: windowed-sinc anti-alias filter with cutoff
/// `0.45 * target_rate`, then linear interpolation onto the target grid.
///
/// The kernel spans [`RESAMPLE_SPAN`] target-rate periods, so its tap count
/// at the source rate grows with the decimation ratio. Output length is
/// `floor(duration * target_rate)`. Equal rates return the clip unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 || clip.rate == 0 {
        return Err(contract!("sample rates must be positive"));
    }
    if target_rate > clip.rate {
        return Err(Error::Unsupported(alloc::format!(
            "upsampling {} Hz -> {target_rate} Hz",
            clip.rate
        )));
    }
    if target_rate == clip.rate {
        return Ok(clip.clone());
    }
    let src = clip.rate as f64;
    let ratio = src / target_rate as f64;
    let half = libm::ceil(RESAMPLE_SPAN as f64 * ratio / 2.0) as usize;
    let kernel = lowpass_kernel(RESAMPLE_CUTOFF * target_rate as f64, src, 2 * half + 1);

    let x = &clip.samples;
    let n = x.len();
    // Only the filtered samples adjacent to output instants are ever needed.
    let filtered_at = |i: usize| -> f64 {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n.saturating_sub(1));
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += x[j] * kernel[j + half - i];
        }
        acc
    };

    let out_len = (n as u64 * target_rate as u64 / clip.rate as u64) as usize;
    let mut out = Vec::with_capacity(out_len);
    for k in 0..out_len {
        // Integer position arithmetic keeps the grid exact.
        let num = k as u64 * clip.rate as u64;
        let i0 = (num / target_rate as u64) as usize;
        let frac = (num % target_rate as u64) as f64 / target_rate as f64;
        let a = filtered_at(i0);
        let v = if frac > 0.0 && i0 + 1 < n {
            a + frac * (filtered_at(i0 + 1) - a)
        } else {
            a
        };
        out.push(v);
    }
    Ok(AudioClip {
        samples: out,
        rate: target_rate,
        normalized: false,
    })
}

/// White Gaussian noise scaled so its measured power is exactly
/// `power(clip) / 10^(snr_db / 10)`.
pub fn noise_for_snr(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::NumericDomain(alloc::format!("SNR {snr_db} dB")));
    }
    let signal_power = clip.power();
    if signal_power == 0.0 {
        return Err(contract!("SNR is undefined for a silent clip"));
    }
    if snr_db == f64::INFINITY {
        return Ok(vec![0.0; clip.len()]);
    }
    let mut rng = seeded(seed, streams::NOISE);
    let mut noise: Vec<f64> = (0..clip.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let target = signal_power / libm::pow(10.0, snr_db / 10.0);
    let measured = mean_square(&noise);
    let scale = libm::sqrt(target / measured);
    noise.iter_mut().for_each(|v| *v *= scale);
    Ok(noise)
}

/// Add calibrated white noise at `snr_db` and re-peak-normalize.
///
/// `f64::INFINITY` means "no noise" and returns the clip unchanged.
pub fn add_white_noise(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip> {
    if !clip.normalized {
        return Err(Error::Normalization("noise is injected into normalized clips only".into()));
    }
    let noise = noise_for_snr(clip, snr_db, seed)?;
    if snr_db == f64::INFINITY {
        return Ok(clip.clone());
    }
    let noisy = AudioClip::new(
        clip.samples.iter().zip(&noise).map(|(s, n)| s + n).collect(),
        clip.rate,
    );
    normalize(&noisy)
}

/// Non-overlapping windows of `window_s` seconds; a trailing partial window
/// is dropped.
pub fn segment(clip: &AudioClip, window_s: f64) -> Result<Vec<AudioClip>> {
    let len = libm::round(window_s * clip.rate as f64) as usize;
    if len == 0 {
        return Err(contract!("window of {window_s} s holds no samples"));
    }
    Ok(clip
        .samples
        .chunks_exact(len)
        .map(|c| AudioClip {
            samples: c.to_vec(),
            rate: clip.rate,
            normalized: clip.normalized,
        })
        .collect())
}

/// One ingredient of a [`SynthKind::Mixture`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MixComponent {
    pub spec: SynthSpec,
    /// Peak amplitude of the component after its own normalization.
    pub gain: f64,
    /// Start time within the mixture, seconds.
    #[cfg_attr(feature = "serde", serde(default))]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum SynthKind {
    Tone {
        freq_hz: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        phase: f64,
    },
    /// Linear sweep from `start_hz` to `end_hz` over the clip.
    Chirp {
        start_hz: f64,
        end_hz: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        phase: f64,
    },
    /// Sinusoidal frequency sweep between `low_hz` and `high_hz`, `rate_hz`
    /// times per second (a siren wail).
    Siren { low_hz: f64, high_hz: f64, rate_hz: f64 },
    /// `(1 - depth * (1 + cos(2 pi mod t + mod_phase)) / 2) * sin(2 pi carrier t)`.
    AmTone {
        carrier_hz: f64,
        mod_hz: f64,
        depth: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        mod_phase: f64,
    },
    /// White Gaussian noise band-limited to `[low_hz, high_hz]`.
    FilteredNoise { low_hz: f64, high_hz: f64 },
    /// Sum of components, each normalized, scaled and placed at its offset;
    /// the sum is peak-normalized.
    Mixture { components: Vec<MixComponent> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SynthSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: SynthKind,
    pub duration: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, duration: f64, seed: u64) -> Self {
        Self { kind, duration, seed }
    }

    pub fn validate(&self, rate: u32) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(contract!("synth duration must be positive, got {}", self.duration));
        }
        let nyquist = rate as f64 / 2.0;
        let check = |name: &str, f: f64| -> Result<()> {
            if !f.is_finite() || f < 0.0 || f >= nyquist {
                Err(contract!("{name} = {f} Hz is not below Nyquist ({nyquist} Hz)"))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            SynthKind::Tone { freq_hz, .. } => check("freq_hz", *freq_hz),
            SynthKind::Chirp { start_hz, end_hz, .. } => {
                check("start_hz", *start_hz)?;
                check("end_hz", *end_hz)
            }
            SynthKind::Siren { low_hz, high_hz, rate_hz } => {
                check("low_hz", *low_hz)?;
                check("high_hz", *high_hz)?;
                check("rate_hz", *rate_hz)
            }
            SynthKind::AmTone { carrier_hz, mod_hz, depth, .. } => {
                check("carrier_hz", *carrier_hz)?;
                check("mod_hz", *mod_hz)?;
                if !(0.0..=1.0).contains(depth) {
                    return Err(contract!("modulation depth {depth} outside [0, 1]"));
                }
                Ok(())
            }
            SynthKind::FilteredNoise { low_hz, high_hz } => {
                check("low_hz", *low_hz)?;
                check("high_hz", *high_hz)?;
                if low_hz >= high_hz {
                    return Err(contract!("noise band [{low_hz}, {high_hz}] is empty"));
                }
                Ok(())
            }
            SynthKind::Mixture { components } => {
                if components.is_empty() {
                    return Err(contract!("mixture has no components"));
                }
                for c in components {
                    c.spec.validate(rate)?;
                    if !(c.gain.is_finite() && c.gain >= 0.0 && c.offset >= 0.0) {
                        return Err(contract!("mixture gain and offset must be non-negative"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Generate the clip described by `spec` at `rate`. Output is
/// peak-normalized and fully determined by the spec (including its seed).
pub fn synthesize(spec: &SynthSpec, rate: u32) -> Result<AudioClip> {
    if rate == 0 {
        return Err(contract!("sample rate must be positive"));
    }
    spec.validate(rate)?;
    let n = libm::round(spec.duration * rate as f64) as usize;
    let dt = 1.0 / rate as f64;
    let two_pi = 2.0 * core::f64::consts::PI;
    let samples: Vec<f64> = match &spec.kind {
        SynthKind::Tone { freq_hz, phase } => (0..n)
            .map(|i| libm::sin(two_pi * freq_hz * i as f64 * dt + phase))
            .collect(),
        SynthKind::Chirp { start_hz, end_hz, phase } => {
            let sweep = (end_hz - start_hz) / spec.duration;
            (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    libm::sin(two_pi * (start_hz * t + 0.5 * sweep * t * t) + phase)
                })
                .collect()
        }
        SynthKind::Siren { low_hz, high_hz, rate_hz } => {
            let centre = 0.5 * (low_hz + high_hz);
            let dev = 0.5 * (high_hz - low_hz);
            (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    // Phase is the integral of centre + dev * sin(2 pi r t).
                    let ph = two_pi * centre * t
                        + if *rate_hz > 0.0 {
                            dev / rate_hz * (1.0 - libm::cos(two_pi * rate_hz * t))
                        } else {
                            0.0
                        };
                    libm::sin(ph)
                })
                .collect()
        }
        SynthKind::AmTone {
            carrier_hz,
            mod_hz,
            depth,
            mod_phase,
        } => (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let env = 1.0 - depth * 0.5 * (1.0 + libm::cos(two_pi * mod_hz * t + mod_phase));
                env * libm::sin(two_pi * carrier_hz * t)
            })
            .collect(),
        SynthKind::FilteredNoise { low_hz, high_hz } => {
            band_noise(n, rate, *low_hz, *high_hz, spec.seed)?
        }
        SynthKind::Mixture { components } => {
            let mut acc = vec![0.0; n];
            for c in components {
                let part = synthesize(&c.spec, rate)?;
                let start = libm::round(c.offset * rate as f64) as usize;
                for (a, v) in acc.iter_mut().skip(start).zip(&part.samples) {
                    *a += c.gain * v;
                }
            }
            acc
        }
    };
    if n == 0 {
        return Ok(AudioClip { samples, rate, normalized: true });
    }
    normalize(&AudioClip::new(samples, rate))
}

fn band_noise(n: usize, rate: u32, low_hz: f64, high_hz: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let len = n.next_power_of_two() * 2;
    let mut rng = seeded(seed, streams::SYNTH);
    let mut buf: Vec<Complex> = (0..len)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft_in_place(&mut buf, false)?;
    let df = rate as f64 / len as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = if k <= len / 2 { k } else { len - k };
        let f = bin as f64 * df;
        if f < low_hz || f > high_hz {
            *c = Complex::default();
        }
    }
    fft_in_place(&mut buf, true)?;
    // Skip the head so the circular filter's wrap-around stays out of the clip.
    let start = (len - n) / 2;
    Ok(buf[start..start + n].iter().map(|c| c.re).collect())
}

/// Draw a value uniformly from `[lo, hi)`.
pub fn uniform(rng: &mut crate::rng::Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitTag {
    Train,
    Test,
    Unassigned,
}

/// Minimum number of examples a class needs before it can be split.
pub const MIN_PER_CLASS: usize = 5;

/// Stratified shuffle split. Each class contributes
/// `round(train_fraction * n_class)` examples to the training set.
///
/// Fails with the offending class index when a class is non-empty but has
/// fewer than [`MIN_PER_CLASS`] examples.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<SplitTag>> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(contract!("train fraction {train_fraction} outside [0, 1]"));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(contract!("label {l} out of range for {n_classes} classes"));
        }
        per_class[l].push(i);
    }
    let mut tags = vec![SplitTag::Unassigned; labels.len()];
    let mut rng = seeded(seed, streams::SPLIT);
    for (class, members) in per_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < MIN_PER_CLASS {
            return Err(Error::Contract(alloc::format!(
                "class {class} has {} examples; at least {MIN_PER_CLASS} are required",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train = libm::round(train_fraction * members.len() as f64) as usize;
        for (k, &i) in members.iter().enumerate() {
            tags[i] = if k < n_train { SplitTag::Train } else { SplitTag::Test };
        }
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, secs: f64) -> AudioClip {
        let n = (secs * rate as f64) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| libm::sin(2.0 * core::f64::consts::PI * freq * i as f64 / rate as f64))
                .collect(),
            rate,
        )
    }

    fn rms(x: &[f64]) -> f64 {
        libm::sqrt(mean_square(x))
    }

    /// Magnitude of the DFT of `x` at `freq`, by direct summation.
    fn dft_mag(x: &[f64], rate: u32, freq: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = 2.0 * core::f64::consts::PI * freq * i as f64 / rate as f64;
            re += v * libm::cos(a);
            im -= v * libm::sin(a);
        }
        libm::hypot(re, im)
    }

    #[test]
    fn normalize_peak_scales() {
        let c = normalize(&AudioClip::new(vec![0.2, -0.4], 4000)).unwrap();
        assert_eq!(c.samples, vec![0.5, -1.0]);
        assert!(c.normalized);
    }

    #[test]
    fn normalize_silence_and_idempotence() {
        let c = normalize(&AudioClip::new(vec![0.0; 8], 4000)).unwrap();
        assert_eq!(c.samples, vec![0.0; 8]);
        assert!(c.normalized);
        let once = normalize(&AudioClip::new(vec![0.1, -0.3, 0.25], 4000)).unwrap();
        assert_eq!(normalize(&once).unwrap(), once);
        assert!(normalize(&AudioClip::new(vec![], 4000)).is_err());
    }

    #[test]
    fn resample_tone_keeps_rms() {
        let src = tone(400.0, 44100, 1.0);
        let out = resample(&src, 4000).unwrap();
        assert_eq!(out.len(), 4000);
        // Skip the filter's edge transients.
        let inner = &out.samples[200..3800];
        let ratio = rms(inner) / rms(&src.samples);
        assert!((ratio - 1.0).abs() < 0.01, "rms ratio {ratio}");
        let at_tone = dft_mag(inner, 4000, 400.0);
        assert!(at_tone > 10.0 * dft_mag(inner, 4000, 410.0));
    }

    #[test]
    fn resample_dc_passes() {
        let out = resample(&AudioClip::new(vec![0.7; 44100], 44100), 4000).unwrap();
        for v in &out.samples[100..3900] {
            assert!((v - 0.7).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn resample_attenuates_transition_band() {
        let src = tone(1900.0, 44100, 1.0);
        let out = resample(&src, 4000).unwrap();
        let inner = &out.samples[200..3800];
        let db = 20.0 * libm::log10(rms(inner) / rms(&src.samples));
        assert!(db <= -20.0, "only {db} dB");
    }

    #[test]
    fn resample_rejects_upsampling() {
        let err = resample(&tone(100.0, 4000, 0.1), 8000).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn noise_infinite_snr_is_identity() {
        let c = normalize(&tone(300.0, 4000, 0.5)).unwrap();
        assert_eq!(add_white_noise(&c, f64::INFINITY, 1).unwrap(), c);
    }

    #[test]
    fn noise_power_is_calibrated() {
        // Unit-power tone: amplitude sqrt(2).
        let mut c = tone(123.0, 4000, 25.0);
        c.samples.iter_mut().for_each(|v| *v *= core::f64::consts::SQRT_2);
        assert!((c.power() - 1.0).abs() < 1e-3);
        let noise = noise_for_snr(&c, 20.0, 9).unwrap();
        assert!(noise.len() >= 100_000);
        let db = 10.0 * libm::log10(mean_square(&noise) / 0.01);
        assert!(db.abs() < 0.1 + 0.01, "{db} dB off");
        for snr in [10.0, 20.0, 40.0] {
            let n = noise_for_snr(&c, snr, 3).unwrap();
            let achieved = 10.0 * libm::log10(c.power() / mean_square(&n));
            assert!((achieved - snr).abs() < 0.1);
        }
    }

    #[test]
    fn noise_is_seeded_and_guards_silence() {
        let c = normalize(&tone(500.0, 4000, 0.25)).unwrap();
        assert_eq!(add_white_noise(&c, 20.0, 5).unwrap(), add_white_noise(&c, 20.0, 5).unwrap());
        assert_ne!(add_white_noise(&c, 20.0, 5).unwrap(), add_white_noise(&c, 20.0, 6).unwrap());
        let silent = normalize(&AudioClip::new(vec![0.0; 16], 4000)).unwrap();
        assert!(add_white_noise(&silent, 20.0, 1).is_err());
        assert!(add_white_noise(&AudioClip::new(vec![0.5; 4], 4000), 20.0, 1).is_err());
    }

    #[test]
    fn synth_tone_peaks_at_its_bin() {
        let c = synthesize(
            &SynthSpec::new(SynthKind::Tone { freq_hz: 440.0, phase: 0.0 }, 1.0, 0),
            4000,
        )
        .unwrap();
        assert_eq!(c.len(), 4000);
        let spectrum = crate::fft::magnitude_spectrum(&c.samples, 4096).unwrap();
        let (peak_bin, _) = spectrum
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let peak_hz = peak_bin as f64 * 4000.0 / 4096.0;
        assert!((peak_hz - 440.0).abs() <= 4000.0 / 4096.0, "{peak_hz}");
    }

    #[test]
    fn synth_mixture_ratio() {
        let part = |f: f64, gain: f64| MixComponent {
            spec: SynthSpec::new(SynthKind::Tone { freq_hz: f, phase: 0.0 }, 1.0, 0),
            gain,
            offset: 0.0,
        };
        let c = synthesize(
            &SynthSpec::new(SynthKind::Mixture { components: vec![part(300.0, 1.0), part(700.0, 2.0)] }, 1.0, 0),
            4000,
        )
        .unwrap();
        let ratio = dft_mag(&c.samples, 4000, 700.0) / dft_mag(&c.samples, 4000, 300.0);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn synth_chirp_zero_crossing_rate_rises() {
        let c = synthesize(
            &SynthSpec::new(SynthKind::Chirp { start_hz: 200.0, end_hz: 800.0, phase: 0.1 }, 1.0, 0),
            4000,
        )
        .unwrap();
        let rates: Vec<usize> = c
            .samples
            .chunks(400)
            .map(|w| w.windows(2).filter(|p| (p[0] < 0.0) != (p[1] < 0.0)).count())
            .collect();
        assert!(rates.windows(2).all(|p| p[1] >= p[0]), "{rates:?}");
        assert!(rates.last().unwrap() > &(rates[0] * 3));
    }

    #[test]
    fn synth_rejects_above_nyquist() {
        let spec = SynthSpec::new(SynthKind::Tone { freq_hz: 2500.0, phase: 0.0 }, 1.0, 0);
        assert!(synthesize(&spec, 4000).is_err());
    }

    #[test]
    fn band_noise_is_seeded_and_band_limited() {
        let spec = SynthSpec::new(SynthKind::FilteredNoise { low_hz: 500.0, high_hz: 900.0 }, 1.0, 42);
        let a = synthesize(&spec, 4000).unwrap();
        assert_eq!(a, synthesize(&spec, 4000).unwrap());
        let inside = dft_mag(&a.samples, 4000, 700.0);
        let outside = dft_mag(&a.samples, 4000, 1600.0);
        assert!(inside > 5.0 * outside);
    }

    #[test]
    fn split_counts() {
        let labels: Vec<usize> = (0..1000).map(|i| i % 10).collect();
        let tags = stratified_split(&labels, 10, 0.8, 7).unwrap();
        for c in 0..10 {
            let train = labels
                .iter()
                .zip(&tags)
                .filter(|(l, t)| **l == c && **t == SplitTag::Train)
                .count();
            assert_eq!(train, 80);
        }
        assert_eq!(tags, stratified_split(&labels, 10, 0.8, 7).unwrap());

        let five = stratified_split(&[0; 5], 1, 0.8, 1).unwrap();
        assert_eq!(five.iter().filter(|t| **t == SplitTag::Train).count(), 4);

        let err = stratified_split(&[0, 0, 0, 0, 0, 1, 1], 2, 0.8, 1).unwrap_err();
        assert!(alloc::format!("{err}").contains("class 1"));
    }

    #[test]
    fn segment_drops_partial_window() {
        let c = AudioClip::new(vec![0.1; 4000 * 4 + 100], 4000);
        let w = segment(&c, 1.0).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|x| x.len() == 4000));
    }
}
