use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{write_manifest, CorpusError, ManifestRow};
use crate::audio::{write_wav, Waveform, SAMPLE_RATE};
use crate::phonemizer::{phonemize, PhonemeSeq, PhonemeTable};

const SYLLABLES: [&str; 12] = ["با", "دا", "ما", "نی", "رۆ", "کە", "سو", "لێ", "شا", "تی", "گو", "وە"];
/// Samples per latent frame of the default feature encoder.
const FRAME: usize = 320;
/// Extra samples so the encoder sees one full receptive field before the
/// first frame.
const CONTEXT: usize = 2200 - FRAME;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyUtterance {
    pub id: String,
    pub transcript: String,
    pub phonemes: PhonemeSeq,
    pub audio: Waveform,
}

/// Synthetic pairs in which every phoneme is a steady tone held for a
/// seeded number of frames. Tone frequencies are whole multiples of
/// `22050 / 320` Hz, so each frame holds whole periods.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<ToyUtterance> {
    let table = PhonemeTable::sorani();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|u| {
            let words: Vec<String> = (0..rng.random_range(1..=2))
                .map(|_| {
                    (0..2)
                        .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                        .collect::<String>()
                })
                .collect();
            let transcript = words.join(" ");
            let phonemes = phonemize(&transcript, &table).expect("toy syllables are in the table");
            let base = SAMPLE_RATE as f64 / FRAME as f64;
            let mut samples = vec![0.0; CONTEXT / 2];
            let mut phase = 0.0f64;
            for &id in phonemes.ids() {
                let frames = rng.random_range(2..=4);
                let freq = base * (1 + (id * 5) % 8) as f64;
                let step = 2.0 * std::f64::consts::PI * freq / SAMPLE_RATE as f64;
                for _ in 0..frames * FRAME {
                    samples.push(0.5 * phase.sin());
                    phase += step;
                }
            }
            samples.extend(std::iter::repeat_n(0.0, CONTEXT - CONTEXT / 2));
            ToyUtterance {
                id: format!("toy{u:04}"),
                transcript,
                phonemes,
                audio: Waveform::new(samples).expect("bounded tones"),
            }
        })
        .collect()
}

/// Writes `manifest.csv` and `wavs/<id>.wav` under `dir`.
pub fn write_toy_corpus(dir: &Path, n: usize, seed: u64) -> Result<Vec<ManifestRow>, CorpusError> {
    let wav_dir = dir.join("wavs");
    std::fs::create_dir_all(&wav_dir).map_err(|e| CorpusError::Io {
        path: wav_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut rows = Vec::with_capacity(n);
    for u in toy_corpus(n, seed) {
        let path = wav_dir.join(format!("{}.wav", u.id));
        write_wav(&path, u.audio.samples()).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        rows.push(ManifestRow {
            duration_s: Some(u.audio.duration_secs()),
            id: u.id,
            transcript: u.transcript,
            category: "General information".into(),
            line: 0,
        });
    }
    write_manifest(&dir.join("manifest.csv"), &rows)?;
    Ok(rows)
}
