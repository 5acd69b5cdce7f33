//! Clip preparation and feature extraction shared by every experiment.

use hopfrc_core::audio::{normalize, resample, segment, AudioClip};
use hopfrc_core::features::{assemble_feature_map, mel_spectrogram, ActivationConfig, FeatureMap, MelConfig};
use hopfrc_core::readout::{Shape, Tensor};
use hopfrc_core::reservoir::{run_reservoir, ReservoirConfig, AUDIO_RATE_HZ};
use rayon::prelude::*;

use crate::error::Result;

/// Length of one classification window.
pub const WINDOW_S: f64 = 1.0;

/// Resample to the reservoir rate, peak-normalize, then cut into one-second
/// windows. Clips shorter than a window are zero-padded to one; a trailing
/// partial window of a longer clip is dropped.
pub fn prepare_windows(clip: &AudioClip) -> Result<Vec<AudioClip>> {
    if clip.is_empty() {
        return Ok(Vec::new());
    }
    let at_rate = resample(clip, AUDIO_RATE_HZ)?;
    if at_rate.is_empty() {
        return Ok(Vec::new());
    }
    let mut clip = normalize(&at_rate)?;
    let window = (WINDOW_S * AUDIO_RATE_HZ as f64) as usize;
    if clip.len() < window {
        clip.samples.resize(window, 0.0);
    }
    Ok(segment(&clip, WINDOW_S)?)
}

/// Everything needed to turn a window into feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Featurizer {
    pub reservoir: ReservoirConfig,
    pub activation: ActivationConfig,
    pub mel: MelConfig,
}

impl Featurizer {
    pub fn hopf(&self, window: &AudioClip, source: &str) -> Result<FeatureMap> {
        let resp = run_reservoir(window, &self.reservoir)?;
        Ok(assemble_feature_map(&resp, &self.activation, source)?)
    }

    pub fn mel(&self, window: &AudioClip, source: &str) -> Result<FeatureMap> {
        Ok(mel_spectrogram(window, &self.mel, source)?)
    }

    /// Hopf maps of many windows, in input order.
    pub fn hopf_all(&self, windows: &[(AudioClip, String)]) -> Result<Vec<FeatureMap>> {
        windows.par_iter().map(|(w, s)| self.hopf(w, s)).collect()
    }
}

/// View a map as a single-channel readout input.
pub fn to_tensor(map: &FeatureMap) -> Tensor {
    Tensor::from_vec(Shape::new(map.rows, map.cols, 1), map.data.clone()).expect("map dimensions match its data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_are_padded_or_cut() {
        let short = AudioClip::new(vec![0.5; 44100 / 2], 44100);
        let w = prepare_windows(&short).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].len(), 4000);
        assert!(w[0].normalized && w[0].samples[3999] == 0.0);

        let long = AudioClip::new((0..10_000).map(|i| (i as f64).sin()).collect(), 4000);
        let w = prepare_windows(&long).unwrap();
        assert_eq!(w.len(), 2);
        assert!(prepare_windows(&AudioClip::new(vec![], 8000)).unwrap().is_empty());
        assert!(prepare_windows(&AudioClip::new(vec![0.1; 100], 2000)).is_err());
    }
}
