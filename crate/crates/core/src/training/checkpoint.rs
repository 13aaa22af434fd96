//! Binary checkpoint files.
//!
//! Layout, all integers little-endian: the magic `KTTS`, a `u32` format
//! version, a `u32`-length-prefixed UTF-8 config snapshot (TOML), the `u64`
//! global step, then a `u32` count of named sections. Each section is a
//! length-prefixed name and a `u32` tensor count; each tensor record is a
//! length-prefixed name, a `u8` rank, `u64` dimensions, a `u8` dtype tag and
//! the `f64` payload.

use std::collections::BTreeMap;
use std::path::Path;

use ktts_tensor::{Adam, ParameterStore, Precision, Tensor};
use serde::{Deserialize, Serialize};

use super::{AlignTrainConfig, TextState, VaeState, VaeTrainConfig};

pub const MAGIC: [u8; 4] = *b"KTTS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("bad magic: not a checkpoint file")]
    BadMagic,
    #[error("unsupported version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated checkpoint: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint config: {0}")]
    Config(String),
    #[error("checkpoint lacks section `{0}`")]
    MissingSection(String),
    #[error("expected a {expected} checkpoint, found {found}")]
    Kind { expected: &'static str, found: &'static str },
}

/// Config snapshot, step and named tensor stores.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub step: u64,
    pub sections: BTreeMap<String, ParameterStore>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Truncated {
                offset: self.pos,
                needed: n,
            }),
        }
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| CheckpointError::Corrupt(format!("non-UTF-8 string at offset {}", self.pos - n)))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, &self.config);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (section, store) in &self.sections {
            put_str(&mut out, section);
            out.extend_from_slice(&(store.len() as u32).to_le_bytes());
            for (name, t) in store.iter() {
                put_str(&mut out, name);
                out.push(t.rank() as u8);
                for &d in t.shape() {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                out.push(store.precision().tag());
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let config = r.string()?;
        let step = r.u64()?;
        let n_sections = r.u32()?;
        let mut sections = BTreeMap::new();
        for _ in 0..n_sections {
            let section = r.string()?;
            let n_tensors = r.u32()?;
            let mut store = ParameterStore::new();
            for _ in 0..n_tensors {
                let name = r.string()?;
                let rank = r.u8()? as usize;
                let mut shape = Vec::with_capacity(rank);
                for _ in 0..rank {
                    shape.push(r.u64()? as usize);
                }
                let tag = r.u8()?;
                if Precision::from_tag(tag).is_none() {
                    return Err(CheckpointError::Corrupt(format!("tensor `{name}` has unknown dtype tag {tag}")));
                }
                let numel = shape
                    .iter()
                    .try_fold(1usize, |a, &d| a.checked_mul(d))
                    .ok_or_else(|| CheckpointError::Corrupt(format!("tensor `{name}` has an absurd shape")))?;
                let raw = r.take(numel.checked_mul(8).ok_or_else(|| CheckpointError::Corrupt(format!("tensor `{name}` is too large")))?)?;
                let data = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                store
                    .insert(name.clone(), Tensor::new(shape, data))
                    .map_err(|e| CheckpointError::Corrupt(format!("section `{section}`: {e}")))?;
            }
            if sections.insert(section.clone(), store).is_some() {
                return Err(CheckpointError::Corrupt(format!("duplicate section `{section}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { config, step, sections })
    }

    pub fn section(&self, name: &str) -> Result<&ParameterStore, CheckpointError> {
        self.sections
            .get(name)
            .ok_or_else(|| CheckpointError::MissingSection(name.to_string()))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes next to `path` and renames into place.
pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, c.to_bytes()).map_err(|e| io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// The config snapshot: which phase wrote the file, its seed (as text, since
/// TOML integers are signed) and its training config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedConfig {
    Vae { seed: String, train: VaeTrainConfig },
    Text { seed: String, train: AlignTrainConfig },
}

impl SavedConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedConfig::Vae { .. } => "vae",
            SavedConfig::Text { .. } => "text",
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("training configs serialize to TOML")
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        toml::from_str(text).map_err(|e| CheckpointError::Config(e.to_string()))
    }
}

impl Checkpoint {
    pub fn saved_config(&self) -> Result<SavedConfig, CheckpointError> {
        SavedConfig::parse(&self.config)
    }
}

fn parse_seed(s: &str) -> Result<u64, CheckpointError> {
    s.parse().map_err(|_| CheckpointError::Config(format!("seed `{s}` is not an unsigned integer")))
}

fn step_tensor(step: u64) -> Tensor {
    Tensor::scalar(step as f64)
}

fn read_step(store: &ParameterStore, name: &str) -> Result<u64, CheckpointError> {
    let t = store
        .get(name)
        .ok_or_else(|| CheckpointError::MissingSection(format!("optimizer_steps/{name}")))?;
    let v = t.data().first().copied().unwrap_or(-1.0);
    if v < 0.0 || v.fract() != 0.0 {
        return Err(CheckpointError::Corrupt(format!("optimizer step {v}")));
    }
    Ok(v as u64)
}

fn moments(sections: &mut BTreeMap<String, ParameterStore>, prefix: &str, opt: &Adam) -> Tensor {
    sections.insert(format!("{prefix}.m"), opt.first_moments().clone());
    sections.insert(format!("{prefix}.v"), opt.second_moments().clone());
    step_tensor(opt.step_count())
}

fn restore_adam(
    c: &Checkpoint,
    prefix: &str,
    config: ktts_tensor::AdamConfig,
) -> Result<Adam, CheckpointError> {
    let step = read_step(c.section("optimizer_steps")?, prefix)?;
    let m = c.section(&format!("{prefix}.m"))?.clone();
    let v = c.section(&format!("{prefix}.v"))?.clone();
    Ok(Adam::from_state(config, step, m, v))
}

fn check_names(params: &ParameterStore, expected: &ParameterStore, what: &str) -> Result<(), CheckpointError> {
    for (name, t) in expected.iter() {
        match params.get(name) {
            Some(p) if p.shape() == t.shape() => {}
            Some(p) => {
                return Err(CheckpointError::Corrupt(format!(
                    "{what} tensor `{name}` has shape {:?}, config implies {:?}",
                    p.shape(),
                    t.shape()
                )))
            }
            None => return Err(CheckpointError::Corrupt(format!("{what} tensor `{name}` is missing"))),
        }
    }
    if params.len() != expected.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{what} has {} tensors, config implies {}",
            params.len(),
            expected.len()
        )));
    }
    Ok(())
}

impl VaeState {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let saved = SavedConfig::Vae {
            seed: self.seed.to_string(),
            train: self.config.clone(),
        };
        let mut sections = BTreeMap::new();
        sections.insert("params".to_string(), self.params.clone());
        let mut steps = ParameterStore::new();
        steps.insert("gen_opt", moments(&mut sections, "gen_opt", &self.gen_opt)).expect("fresh store");
        steps.insert("disc_opt", moments(&mut sections, "disc_opt", &self.disc_opt)).expect("fresh store");
        sections.insert("optimizer_steps".to_string(), steps);
        Checkpoint {
            config: saved.to_text(),
            step: self.step,
            sections,
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, CheckpointError> {
        let (seed, config) = match c.saved_config()? {
            SavedConfig::Vae { seed, train } => (parse_seed(&seed)?, train),
            other => {
                return Err(CheckpointError::Kind {
                    expected: "vae",
                    found: other.kind(),
                })
            }
        };
        let fresh = crate::networks::init_vae(&config.net, 0).map_err(|e| CheckpointError::Config(e.to_string()))?;
        let params = c.section("params")?.clone();
        check_names(&params, &fresh, "VAE")?;
        Ok(Self {
            gen_opt: restore_adam(c, "gen_opt", config.adam())?,
            disc_opt: restore_adam(c, "disc_opt", config.adam())?,
            config,
            seed,
            step: c.step,
            params,
        })
    }
}

impl TextState {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let saved = SavedConfig::Text {
            seed: self.seed.to_string(),
            train: self.config.clone(),
        };
        let mut sections = BTreeMap::new();
        sections.insert("params".to_string(), self.params.clone());
        let mut steps = ParameterStore::new();
        steps.insert("opt", moments(&mut sections, "opt", &self.opt)).expect("fresh store");
        sections.insert("optimizer_steps".to_string(), steps);
        Checkpoint {
            config: saved.to_text(),
            step: self.step,
            sections,
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, CheckpointError> {
        let (seed, config) = match c.saved_config()? {
            SavedConfig::Text { seed, train } => (parse_seed(&seed)?, train),
            other => {
                return Err(CheckpointError::Kind {
                    expected: "text",
                    found: other.kind(),
                })
            }
        };
        let fresh = crate::networks::init_text(&config.net, 0).map_err(|e| CheckpointError::Config(e.to_string()))?;
        let params = c.section("params")?.clone();
        check_names(&params, &fresh, "text model")?;
        Ok(Self {
            opt: restore_adam(c, "opt", config.adam())?,
            config,
            seed,
            step: c.step,
            params,
        })
    }
}
