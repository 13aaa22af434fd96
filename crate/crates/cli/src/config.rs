//! Training configs: a preset, overlaid by an optional TOML file, overlaid
//! by command-line flags.

use std::path::Path;

use clap::ValueEnum;
use ktts_core::audio::{StftLossConfig, StftResolution};
use ktts_core::networks::{TextNetConfig, VaeNetConfig};
use ktts_core::training::{AlignTrainConfig, VaeTrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-size networks.
    Default,
    /// Four-channel networks for quick checks.
    Tiny,
}

pub fn vae_preset(preset: Preset) -> VaeTrainConfig {
    match preset {
        Preset::Default => VaeTrainConfig::default(),
        Preset::Tiny => VaeTrainConfig {
            net: VaeNetConfig::tiny(),
            window: 2,
            batch_size: 2,
            stft: StftLossConfig {
                resolutions: vec![StftResolution::new(128, 32, 96), StftResolution::new(64, 16, 48)],
            },
            ..VaeTrainConfig::default()
        },
    }
}

pub fn align_preset(preset: Preset) -> AlignTrainConfig {
    match preset {
        Preset::Default => AlignTrainConfig::default(),
        Preset::Tiny => AlignTrainConfig {
            net: TextNetConfig::tiny(),
            batch_size: 2,
            ..AlignTrainConfig::default()
        },
    }
}

/// Reads `path` as TOML and overlays its keys onto `base`.
pub fn overlay<T>(base: &T, path: Option<&Path>) -> Result<T, CliError>
where
    T: Clone + serde::Serialize + serde::de::DeserializeOwned,
{
    let Some(path) = path else {
        return Ok(base.clone());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let file: toml::Table = toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut merged = match toml::Value::try_from(base) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("training configs serialize to tables"),
    };
    merge(&mut merged, file);
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Recursively replaces keys of `base` with those of `top`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vae.toml");
        std::fs::write(&path, "window = 3\n[net.wave_decoder]\nresidual_blocks = 2\n").unwrap();
        let cfg = overlay(&vae_preset(Preset::Tiny), Some(&path)).unwrap();
        assert_eq!(cfg.window, 3);
        assert_eq!(cfg.net.wave_decoder.residual_blocks, 2);
        assert_eq!(cfg.net.wave_decoder.channels, 4);
        assert_eq!(cfg.batch_size, 2);
    }

    #[test]
    fn bad_file_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "window = \"wide\"\n").unwrap();
        let err = overlay(&vae_preset(Preset::Tiny), Some(&path)).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
