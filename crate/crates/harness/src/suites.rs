//! Built-in synthetic datasets standing in for recorded corpora.

use hopfrc_core::audio::{uniform, MixComponent, SplitTag, SynthKind, SynthSpec};
use hopfrc_core::rng::{seeded, streams, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::manifest::{ClipSource, DatasetManifest, ManifestEntry};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Tone, chirp, amplitude-modulated tone, band-limited noise.
    SoundsA,
    /// Siren, two-tone chord, fast tremolo, noise burst.
    SoundsB,
    /// Ten visually distinct classes for feature-map galleries.
    Gallery,
}

impl Suite {
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Suite::SoundsA => &["tone", "chirp", "am-tone", "band-noise"],
            Suite::SoundsB => &["siren", "chord", "tremolo", "burst"],
            Suite::Gallery => &[
                "low-tone",
                "high-tone",
                "chirp-up",
                "chirp-down",
                "siren",
                "slow-am",
                "tremolo",
                "low-noise",
                "high-noise",
                "chord",
            ],
        }
    }

    /// One randomized clip of `class`, one second long.
    pub fn clip(self, class: usize, rng: &mut Rng) -> SynthSpec {
        let kind = match (self, class) {
            (Suite::SoundsA, 0) => tone(rng, 200.0, 1500.0),
            (Suite::SoundsA, 1) => {
                let (lo, hi) = (uniform(rng, 100.0, 400.0), uniform(rng, 1400.0, 1900.0));
                let (start_hz, end_hz) = if rng.random::<bool>() { (hi, lo) } else { (lo, hi) };
                SynthKind::Chirp {
                    start_hz,
                    end_hz,
                    phase: uniform(rng, 0.0, TAU),
                }
            }
            (Suite::SoundsA, 2) => am(rng, 200.0, 1500.0, 2.0, 8.0),
            (Suite::SoundsA, _) => {
                let low_hz = uniform(rng, 100.0, 800.0);
                SynthKind::FilteredNoise {
                    low_hz,
                    high_hz: low_hz + uniform(rng, 400.0, 1000.0),
                }
            }
            (Suite::SoundsB, 0) => siren(rng),
            (Suite::SoundsB, 1) => chord(rng),
            (Suite::SoundsB, 2) => am(rng, 300.0, 1500.0, 20.0, 40.0),
            (Suite::SoundsB, _) => {
                let low_hz = uniform(rng, 200.0, 1000.0);
                let burst = SynthSpec::new(
                    SynthKind::FilteredNoise {
                        low_hz,
                        high_hz: low_hz + uniform(rng, 300.0, 800.0),
                    },
                    uniform(rng, 0.2, 0.4),
                    rng.random(),
                );
                SynthKind::Mixture {
                    components: vec![MixComponent {
                        spec: burst,
                        gain: 1.0,
                        offset: uniform(rng, 0.0, 0.55),
                    }],
                }
            }
            (Suite::Gallery, 0) => tone(rng, 200.0, 500.0),
            (Suite::Gallery, 1) => tone(rng, 1000.0, 1600.0),
            (Suite::Gallery, 2 | 3) => {
                let (lo, hi) = (uniform(rng, 150.0, 400.0), uniform(rng, 1400.0, 1800.0));
                let (start_hz, end_hz) = if class == 2 { (lo, hi) } else { (hi, lo) };
                SynthKind::Chirp { start_hz, end_hz, phase: 0.0 }
            }
            (Suite::Gallery, 4) => siren(rng),
            (Suite::Gallery, 5) => am(rng, 300.0, 1500.0, 2.0, 5.0),
            (Suite::Gallery, 6) => am(rng, 300.0, 1500.0, 20.0, 40.0),
            (Suite::Gallery, 7 | 8) => {
                let low_hz = if class == 7 { uniform(rng, 100.0, 300.0) } else { uniform(rng, 1000.0, 1200.0) };
                SynthKind::FilteredNoise {
                    low_hz,
                    high_hz: low_hz + 500.0,
                }
            }
            (Suite::Gallery, _) => chord(rng),
        };
        SynthSpec::new(kind, 1.0, rng.random())
    }

    /// `clips_per_class` clips of every class, class by class, unsplit.
    pub fn manifest(self, clips_per_class: usize, seed: u64) -> DatasetManifest {
        let mut rng = seeded(seed, streams::SYNTH);
        let names = self.class_names();
        let mut entries = Vec::with_capacity(names.len() * clips_per_class);
        for class in 0..names.len() {
            for _ in 0..clips_per_class {
                entries.push(ManifestEntry {
                    source: ClipSource::Synth(self.clip(class, &mut rng)),
                    label: class,
                    split: SplitTag::Unassigned,
                });
            }
        }
        DatasetManifest {
            entries,
            class_names: names.iter().map(|s| s.to_string()).collect(),
            seed,
        }
    }
}

fn tone(rng: &mut Rng, lo: f64, hi: f64) -> SynthKind {
    SynthKind::Tone {
        freq_hz: uniform(rng, lo, hi),
        phase: uniform(rng, 0.0, TAU),
    }
}

fn am(rng: &mut Rng, lo: f64, hi: f64, mod_lo: f64, mod_hi: f64) -> SynthKind {
    SynthKind::AmTone {
        carrier_hz: uniform(rng, lo, hi),
        mod_hz: uniform(rng, mod_lo, mod_hi),
        depth: uniform(rng, 0.8, 1.0),
        mod_phase: uniform(rng, 0.0, TAU),
    }
}

fn siren(rng: &mut Rng) -> SynthKind {
    SynthKind::Siren {
        low_hz: uniform(rng, 300.0, 700.0),
        high_hz: uniform(rng, 1000.0, 1600.0),
        rate_hz: uniform(rng, 1.0, 3.0),
    }
}

fn chord(rng: &mut Rng) -> SynthKind {
    let f1 = uniform(rng, 200.0, 900.0);
    let f2 = f1 * uniform(rng, 1.25, 1.6);
    let part = |freq_hz| MixComponent {
        spec: SynthSpec::new(SynthKind::Tone { freq_hz, phase: 0.0 }, 1.0, 0),
        gain: 1.0,
        offset: 0.0,
    };
    SynthKind::Mixture {
        components: vec![part(f1), part(f2)],
    }
}

/// The fixed siren-like sweep used by the noise and mixed-signal studies.
pub fn reference_siren(duration: f64) -> SynthSpec {
    SynthSpec::new(
        SynthKind::Siren {
            low_hz: 600.0,
            high_hz: 1400.0,
            rate_hz: 2.0,
        },
        duration,
        0,
    )
}

/// Eight seconds: a drill-like noise band and a two-tone horn throughout,
/// joined by the reference siren at `siren_gain` for the last four seconds.
pub fn mixed_scene(siren_gain: f64) -> SynthSpec {
    let drill = SynthSpec::new(
        SynthKind::FilteredNoise {
            low_hz: 250.0,
            high_hz: 700.0,
        },
        8.0,
        17,
    );
    let horn = SynthSpec::new(
        SynthKind::Mixture {
            components: [400.0, 500.0]
                .into_iter()
                .map(|freq_hz| MixComponent {
                    spec: SynthSpec::new(SynthKind::Tone { freq_hz, phase: 0.0 }, 8.0, 0),
                    gain: 1.0,
                    offset: 0.0,
                })
                .collect(),
        },
        8.0,
        0,
    );
    SynthSpec::new(
        SynthKind::Mixture {
            components: vec![
                MixComponent {
                    spec: drill,
                    gain: 1.0,
                    offset: 0.0,
                },
                MixComponent {
                    spec: horn,
                    gain: 1.0,
                    offset: 0.0,
                },
                MixComponent {
                    spec: reference_siren(4.0),
                    gain: siren_gain,
                    offset: 4.0,
                },
            ],
        },
        8.0,
        0,
    )
}
