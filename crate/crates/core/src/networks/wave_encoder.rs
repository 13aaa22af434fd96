use ktts_tensor::{Bound, Conv1dSpec, Var};

use super::config::{FeatureEncoderConfig, WaveEncoderConfig};
use super::layers::{self, Init};

const PREFIX: &str = "wave_encoder";

pub fn init(init: &mut Init<'_>, cfg: &WaveEncoderConfig) {
    let f = &cfg.feature;
    for (i, &k) in f.kernels.iter().enumerate() {
        let c_in = if i == 0 { 1 } else { f.channels };
        init.conv(&format!("{PREFIX}.feature.conv{i}"), c_in, f.channels, k, 1);
        init.prelu(&format!("{PREFIX}.feature.act{i}"));
    }
    layers::init_transformer_stack(init, &format!("{PREFIX}.stack"), &cfg.transformer);
    init.linear(&format!("{PREFIX}.head"), cfg.transformer.model_dim, 2 * cfg.latent_channels);
}

/// Unpadded strided convolutions with PReLU over a `[1, samples]` input.
/// The caller guarantees at least one receptive field of samples.
pub fn features<'g>(p: &Bound<'g>, x: Var<'g>, cfg: &FeatureEncoderConfig) -> Var<'g> {
    let mut h = x;
    for (i, &s) in cfg.strides.iter().enumerate() {
        h = layers::conv(p, &format!("{PREFIX}.feature.conv{i}"), h, Conv1dSpec::valid(s));
        h = layers::prelu(p, &format!("{PREFIX}.feature.act{i}"), h);
    }
    h
}

/// `(mean, log_std)` of the posterior, both `[latent, frames]`.
pub fn forward<'g>(p: &Bound<'g>, x: Var<'g>, cfg: &WaveEncoderConfig) -> (Var<'g>, Var<'g>) {
    let tokens = features(p, x, &cfg.feature);
    let hidden = layers::transformer_stack(p, &format!("{PREFIX}.stack"), tokens, &cfg.transformer);
    let stats = layers::linear(p, &format!("{PREFIX}.head"), hidden);
    let l = cfg.latent_channels;
    (stats.slice_rows(0, l), stats.slice_rows(l, 2 * l))
}
