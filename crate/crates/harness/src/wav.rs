//! RIFF/WAVE decoding (PCM 8/16/24/32-bit, IEEE float 32/64) and 16-bit
//! PCM encoding.

use hopfrc_core::audio::AudioClip;

use crate::error::{HarnessError, Result};

const PCM: u16 = 1;
const IEEE_FLOAT: u16 = 3;
const EXTENSIBLE: u16 = 0xFFFE;

fn err(offset: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Wav {
        offset,
        message: message.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    codec: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

/// Decode a WAV file. Integer samples are scaled by `2^(bits - 1)`, channels
/// are averaged to mono, and the result is not flagged normalized.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(err(bytes.len(), "file shorter than the RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(err(0, "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(err(8, "missing WAVE tag"));
    }

    let mut pos = 12;
    let mut format = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(err(pos, "no data chunk"));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(err(body, "fmt chunk is truncated"));
                }
                let mut codec = u16_at(bytes, body);
                if codec == EXTENSIBLE {
                    if size < 40 {
                        return Err(err(body, "extensible fmt chunk is truncated"));
                    }
                    codec = u16_at(bytes, body + 24);
                }
                format = Some(Format {
                    codec,
                    channels: u16_at(bytes, body + 2),
                    rate: u32_at(bytes, body + 4),
                    bits: u16_at(bytes, body + 14),
                });
            }
            b"data" => {
                let f = format.ok_or_else(|| err(pos, "data chunk before fmt chunk"))?;
                if body + size > bytes.len() {
                    return Err(err(
                        bytes.len(),
                        format!("data chunk declares {size} bytes but only {} remain", bytes.len() - body),
                    ));
                }
                return decode(&bytes[body..body + size], body, &f);
            }
            _ => {}
        }
        // Chunks are padded to an even length.
        pos = body + size + (size & 1);
    }
}

fn decode(data: &[u8], offset: usize, f: &Format) -> Result<AudioClip> {
    if f.channels == 0 {
        return Err(err(offset, "zero channels"));
    }
    if f.rate == 0 {
        return Err(err(offset, "zero sample rate"));
    }
    let width = match (f.codec, f.bits) {
        (PCM, 8 | 16 | 24 | 32) | (IEEE_FLOAT, 32 | 64) => f.bits as usize / 8,
        (PCM | IEEE_FLOAT, b) => return Err(err(offset, format!("unsupported bit depth {b}"))),
        (c, _) => return Err(err(offset, format!("unsupported codec {c:#06x}"))),
    };
    let frame = width * f.channels as usize;
    if !data.len().is_multiple_of(frame) {
        return Err(err(offset + data.len() - data.len() % frame, "truncated sample frame"));
    }
    let sample = |b: &[u8]| -> f64 {
        match (f.codec, width) {
            (PCM, 1) => (b[0] as f64 - 128.0) / 128.0,
            (PCM, 2) => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
            (PCM, 3) => (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f64 / 8_388_608.0,
            (PCM, _) => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
            (_, 4) => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            _ => f64::from_le_bytes(b.try_into().unwrap()),
        }
    };
    let samples = data
        .chunks_exact(frame)
        .map(|fr| fr.chunks_exact(width).map(sample).sum::<f64>() / f.channels as f64)
        .collect();
    Ok(AudioClip::new(samples, f.rate))
}

/// Encode a mono clip as 16-bit PCM. Samples are clamped to `[-1, 1]`.
pub fn write_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.rate.to_le_bytes());
    out.extend_from_slice(&(clip.rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Canonical 44-byte header followed by `data`.
    pub(crate) fn wav(codec: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&codec.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&rate.to_le_bytes());
        let align = channels * bits / 8;
        b.extend_from_slice(&(rate * align as u32).to_le_bytes());
        b.extend_from_slice(&align.to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(data);
        b
    }

    #[test]
    fn decodes_each_sample_format() {
        let c = read_wav(&wav(PCM, 1, 8000, 16, &(-32768i16).to_le_bytes())).unwrap();
        assert_eq!((c.samples[0], c.rate, c.normalized), (-1.0, 8000, false));
        assert_eq!(read_wav(&wav(PCM, 1, 8000, 8, &[0, 128, 192])).unwrap().samples, vec![-1.0, 0.0, 0.5]);
        let c = read_wav(&wav(PCM, 1, 8000, 24, &[0, 0, 0x80, 0, 0, 0x40])).unwrap();
        assert_eq!(c.samples, vec![-1.0, 0.5]);
        let c = read_wav(&wav(IEEE_FLOAT, 1, 8000, 32, &0.25f32.to_le_bytes())).unwrap();
        assert_eq!(c.samples, vec![0.25]);
    }

    #[test]
    fn stereo_is_averaged() {
        let mut d = Vec::new();
        d.extend_from_slice(&16384i16.to_le_bytes());
        d.extend_from_slice(&(-16384i16).to_le_bytes());
        assert_eq!(read_wav(&wav(PCM, 2, 44100, 16, &d)).unwrap().samples, vec![0.0]);
    }

    #[test]
    fn empty_data_keeps_rate() {
        let b = wav(PCM, 1, 22050, 16, &[]);
        assert_eq!(b.len(), 44);
        let c = read_wav(&b).unwrap();
        assert!(c.samples.is_empty());
        assert_eq!(c.rate, 22050);
    }

    #[test]
    fn errors_name_offsets() {
        let mut b = wav(PCM, 1, 8000, 16, &[1, 2, 3, 4]);
        b.truncate(46);
        let e = read_wav(&b).unwrap_err();
        assert!(matches!(e, HarnessError::Wav { offset: 46, .. }), "{e}");
        assert!(matches!(read_wav(b"RIFX0000WAVE").unwrap_err(), HarnessError::Wav { offset: 0, .. }));
        let e = read_wav(&wav(2, 1, 8000, 16, &[])).unwrap_err();
        assert!(e.to_string().contains("codec"), "{e}");
        assert!(read_wav(&wav(PCM, 1, 8000, 16, &[1, 2, 3])).is_err());
    }

    #[test]
    fn pcm16_round_trip_within_one_step() {
        let clip = AudioClip::new((0..500).map(|i| (i as f64 * 0.05).sin() * 0.9).collect(), 4000);
        let back = read_wav(&write_wav_pcm16(&clip)).unwrap();
        assert_eq!(back.rate, 4000);
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
