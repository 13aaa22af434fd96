use ktts_tensor::{Bound, Conv1dSpec, Var};

use super::config::DiscriminatorConfig;
use super::layers::{self, Init};

const PREFIX: &str = "discriminator";

pub fn init(init: &mut Init<'_>, cfg: &DiscriminatorConfig) {
    let n = cfg.layers;
    for i in 0..n {
        let c_in = if i == 0 { 1 } else { cfg.channels };
        let c_out = if i + 1 == n { 1 } else { cfg.channels };
        init.conv(&format!("{PREFIX}.conv{i}"), c_in, c_out, cfg.kernel, 1);
    }
}

/// One score per sample of a `[1, samples]` waveform.
pub fn forward<'g>(p: &Bound<'g>, x: Var<'g>, cfg: &DiscriminatorConfig) -> Var<'g> {
    let dilations = cfg.dilations();
    let mut h = x;
    for (i, &d) in dilations.iter().enumerate() {
        h = layers::conv(p, &format!("{PREFIX}.conv{i}"), h, Conv1dSpec::same(cfg.kernel, d));
        if i + 1 < dilations.len() {
            h = h.leaky_relu(cfg.leaky_slope);
        }
    }
    h
}
