use ktts_tensor::{Bound, Conv1dSpec, Var};

use super::config::DurationPredictorConfig;
use super::layers::{self, Init};

const PREFIX: &str = "duration";

pub fn init(init: &mut Init<'_>, cfg: &DurationPredictorConfig) {
    for b in 0..cfg.blocks {
        let name = format!("{PREFIX}.block{b}");
        init.conv(&format!("{name}.conv"), cfg.input_dim, cfg.filters, cfg.kernel, 1);
        init.prelu(&format!("{name}.act"));
        init.layer_norm(&format!("{name}.norm"), cfg.filters);
    }
    init.linear(&format!("{PREFIX}.head"), cfg.filters, 1);
}

/// Real-valued frames per token, `[1, tokens]`. The input is detached, so no
/// gradient from this head reaches whatever produced `hidden`.
pub fn forward<'g>(p: &Bound<'g>, hidden: Var<'g>, cfg: &DurationPredictorConfig) -> Var<'g> {
    let mut x = hidden.detach();
    for b in 0..cfg.blocks {
        let name = format!("{PREFIX}.block{b}");
        let h = layers::conv(p, &format!("{name}.conv"), x, Conv1dSpec::same(cfg.kernel, 1));
        let h = layers::prelu(p, &format!("{name}.act"), h);
        x = x + layers::layer_norm(p, &format!("{name}.norm"), h);
    }
    layers::linear(p, &format!("{PREFIX}.head"), x)
}
