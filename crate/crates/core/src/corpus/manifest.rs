use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorpusError, DEFAULT_CATEGORIES};
use crate::audio::{read_wav, AudioError};

/// One manifest line: `id,transcript,category` and an optional
/// `duration_s` for metadata-only manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub transcript: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// 1-based line in the source file; 0 for rows built in memory.
    #[serde(skip)]
    pub line: u64,
}

/// A manifest row whose audio was found and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub transcript: String,
    pub category: String,
    pub audio_path: PathBuf,
    pub duration_s: f64,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads and checks a manifest without touching audio: every id is
/// non-empty and unique, transcripts are non-empty, durations (when
/// present) are positive.
pub fn read_manifest(csv_path: &Path) -> Result<Vec<ManifestRow>, CorpusError> {
    let shown = csv_path.display().to_string();
    let file = std::fs::File::open(csv_path).map_err(|e| io_error(csv_path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Csv {
            path: shown.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let found: Vec<String> = headers.iter().map(str::to_string).collect();
    if !["id", "transcript", "category"].iter().all(|c| found.iter().any(|h| h == c)) {
        return Err(CorpusError::Header { path: shown, found });
    }

    let mut rows = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for result in reader.deserialize::<ManifestRow>() {
        let mut row = result.map_err(|e| CorpusError::Csv {
            path: shown.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        row.line = rows.len() as u64 + 2;
        if row.id.is_empty() {
            return Err(CorpusError::EmptyField {
                line: row.line,
                column: "id",
            });
        }
        if row.transcript.is_empty() {
            return Err(CorpusError::EmptyField {
                line: row.line,
                column: "transcript",
            });
        }
        if let Some(&first) = seen.get(&row.id) {
            return Err(CorpusError::DuplicateId {
                id: row.id,
                line: row.line,
                first,
            });
        }
        if let Some(d) = row.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(CorpusError::BadDuration {
                    id: row.id,
                    line: row.line,
                    value: d,
                });
            }
        }
        if !DEFAULT_CATEGORIES.contains(&row.category.as_str()) {
            log::warn!("line {}: category `{}` is not a default topic", row.line, row.category);
        }
        seen.insert(row.id.clone(), row.line);
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a manifest and validates `<wav_dir>/<id>.wav` for every row,
/// measuring durations from the audio.
pub fn load_manifest(csv_path: &Path, wav_dir: &Path) -> Result<Vec<Utterance>, CorpusError> {
    read_manifest(csv_path)?
        .into_iter()
        .map(|row| {
            let path = wav_dir.join(format!("{}.wav", row.id));
            let shown = path.display().to_string();
            let audio = match read_wav(&path) {
                Ok(a) => a,
                Err(AudioError::Io { .. }) if !path.exists() => {
                    return Err(CorpusError::MissingAudio {
                        id: row.id,
                        line: row.line,
                        path: shown,
                    })
                }
                Err(source) => {
                    return Err(CorpusError::InvalidAudio {
                        id: row.id,
                        line: row.line,
                        path: shown,
                        source,
                    })
                }
            };
            Ok(Utterance {
                duration_s: audio.duration_secs(),
                id: row.id,
                transcript: row.transcript,
                category: row.category,
                audio_path: path,
            })
        })
        .collect()
}

/// Writes rows with the manifest schema, including `duration_s` when every
/// row has one.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), CorpusError> {
    let with_duration = !rows.is_empty() && rows.iter().all(|r| r.duration_s.is_some());
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header = vec!["id", "transcript", "category"];
    if with_duration {
        header.push("duration_s");
    }
    writer.write_record(&header).map_err(|e| io_error(path, e))?;
    for r in rows {
        let mut record = vec![r.id.clone(), r.transcript.clone(), r.category.clone()];
        if with_duration {
            record.push(r.duration_s.expect("checked above").to_string());
        }
        writer.write_record(&record).map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}
