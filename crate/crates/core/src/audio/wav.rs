//! RIFF/WAVE reading and writing, restricted to the corpus recording format:
//! PCM, 16-bit signed little-endian, mono, 22,050 Hz.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioError, Waveform, SAMPLE_RATE};

const PCM_FORMAT: u16 = 1;
const BITS_PER_SAMPLE: u16 = 16;
const CHANNELS: u16 = 1;
const FULL_SCALE: f64 = 32768.0;

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes an in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(AudioError::NotRiff);
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWave);
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).ok_or(AudioError::Truncated)?;
        if body_end > bytes.len() {
            return Err(AudioError::Truncated);
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(AudioError::Truncated);
                }
                fmt = Some(FmtChunk {
                    format_tag: u16_at(body, 0),
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits_per_sample: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or(AudioError::MissingChunk("fmt "))?;
    if fmt.format_tag != PCM_FORMAT {
        return Err(AudioError::NotPcm(fmt.format_tag));
    }
    if fmt.channels != CHANNELS {
        return Err(AudioError::Channels(fmt.channels));
    }
    if fmt.sample_rate != SAMPLE_RATE {
        return Err(AudioError::SampleRate(fmt.sample_rate));
    }
    if fmt.bits_per_sample != BITS_PER_SAMPLE {
        return Err(AudioError::BitsPerSample(fmt.bits_per_sample));
    }
    let data = data.ok_or(AudioError::MissingChunk("data"))?;
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / FULL_SCALE)
        .collect();
    Waveform::new(samples)
}

/// Reads and validates a WAV file.
pub fn read_wav(path: &Path) -> Result<Waveform, AudioError> {
    let bytes = fs::read(path).map_err(|e| AudioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode_wav(&bytes)
}

/// Quantizes one sample to 16 bits, saturating outside `[-1, 1]`.
pub fn quantize(sample: f64) -> i16 {
    (sample * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Encodes samples as a mono 22,050 Hz PCM16 WAV file.
pub fn encode_wav(samples: &[f64]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let block_align = CHANNELS * BITS_PER_SAMPLE / 8;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&CHANNELS.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&BITS_PER_SAMPLE.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

/// Writes samples atomically (temporary file, then rename).
pub fn write_wav(path: &Path, samples: &[f64]) -> Result<(), AudioError> {
    let io = |e: std::io::Error| AudioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let bytes = encode_wav(samples);
    let tmp = path.with_extension("wav.tmp");
    let mut file = fs::File::create(&tmp).map_err(io)?;
    file.write_all(&bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Header written field by field, independent of `encode_wav`.
    fn handmade_wav(channels: u16, rate: u32, bits: u16, tag: u16, payload: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend(b"RIFF");
        v.extend((36 + payload.len() as u32).to_le_bytes());
        v.extend(b"WAVE");
        v.extend(b"fmt ");
        v.extend(16u32.to_le_bytes());
        v.extend(tag.to_le_bytes());
        v.extend(channels.to_le_bytes());
        v.extend(rate.to_le_bytes());
        v.extend((rate * channels as u32 * bits as u32 / 8).to_le_bytes());
        v.extend((channels * bits / 8).to_le_bytes());
        v.extend(bits.to_le_bytes());
        v.extend(b"data");
        v.extend((payload.len() as u32).to_le_bytes());
        v.extend(payload);
        v
    }

    #[test]
    fn rejects_each_violated_field() {
        let payload = [0u8; 8];
        assert_eq!(decode_wav(b"RIFX\0\0\0\0WAVE").unwrap_err(), AudioError::NotRiff);
        assert_eq!(decode_wav(b"RIFF\0\0\0\0AVI ").unwrap_err(), AudioError::NotWave);
        assert_eq!(
            decode_wav(&handmade_wav(1, 22050, 16, 3, &payload)).unwrap_err(),
            AudioError::NotPcm(3)
        );
        let stereo = decode_wav(&handmade_wav(2, 22050, 16, 1, &payload)).unwrap_err();
        assert_eq!(stereo, AudioError::Channels(2));
        assert_eq!(stereo.to_string(), "channels: expected 1, found 2");
        assert_eq!(
            decode_wav(&handmade_wav(1, 44100, 16, 1, &payload)).unwrap_err(),
            AudioError::SampleRate(44100)
        );
        assert_eq!(
            decode_wav(&handmade_wav(1, 22050, 8, 1, &payload)).unwrap_err(),
            AudioError::BitsPerSample(8)
        );
    }

    #[test]
    fn truncated_data_chunk() {
        let mut v = handmade_wav(1, 22050, 16, 1, &[0u8; 8]);
        v.truncate(v.len() - 3);
        assert_eq!(decode_wav(&v).unwrap_err(), AudioError::Truncated);
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut v = handmade_wav(1, 22050, 16, 1, &[0, 0x40, 0, 0xC0]);
        // splice a LIST chunk with odd size (padded) before "fmt "
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), b"abc\0"].concat();
        v.splice(12..12, list);
        let w = decode_wav(&v).unwrap();
        assert_eq!(w.samples(), &[0.5, -0.5]);
    }

    #[test]
    fn all_zero_payload() {
        let w = decode_wav(&handmade_wav(1, 22050, 16, 1, &[0u8; 100])).unwrap();
        assert_eq!(w.len(), 50);
        assert!(w.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn saturation() {
        assert_eq!(quantize(1.5), i16::MAX);
        assert_eq!(quantize(1.0), i16::MAX);
        assert_eq!(quantize(-1.0), i16::MIN);
        assert_eq!(quantize(-7.0), i16::MIN);
        assert_eq!(quantize(0.5), 16384);
    }
}
