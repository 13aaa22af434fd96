use ktts_tensor::{Bound, Var};

use super::config::TextEncoderConfig;
use super::layers::{self, Init};

const PREFIX: &str = "text_encoder";
const EMBEDDING_STD: f64 = 0.02;

pub fn init(init: &mut Init<'_>, cfg: &TextEncoderConfig) {
    let dim = cfg.transformer.model_dim;
    init.normal(format!("{PREFIX}.embedding"), &[dim, cfg.vocab_size], EMBEDDING_STD);
    layers::init_transformer_stack(init, &format!("{PREFIX}.stack"), &cfg.transformer);
    init.linear(&format!("{PREFIX}.head"), dim, 2 * cfg.latent_channels);
}

/// Outputs of the text encoder on the graph.
pub struct TextEncoding<'g> {
    pub mean: Var<'g>,
    /// Unclamped; clamping happens where it is turned into a deviation.
    pub log_std: Var<'g>,
    pub hidden: Var<'g>,
}

/// `ids` must already be range-checked against the vocabulary.
pub fn forward<'g>(p: &Bound<'g>, ids: &[usize], cfg: &TextEncoderConfig) -> TextEncoding<'g> {
    let embedded = p.get(&format!("{PREFIX}.embedding")).gather_cols(ids);
    let hidden = layers::transformer_stack(p, &format!("{PREFIX}.stack"), embedded, &cfg.transformer);
    let stats = layers::linear(p, &format!("{PREFIX}.head"), hidden);
    let l = cfg.latent_channels;
    TextEncoding {
        mean: stats.slice_rows(0, l),
        log_std: stats.slice_rows(l, 2 * l),
        hidden,
    }
}
