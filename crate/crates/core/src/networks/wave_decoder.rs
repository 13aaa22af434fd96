use ktts_tensor::{Bound, Conv1dSpec, Var};

use super::config::WaveDecoderConfig;
use super::layers::{self, Init};

const PREFIX: &str = "wave_decoder";
const UPSAMPLE_SLOPE: f64 = 0.4;

pub fn init(init: &mut Init<'_>, cfg: &WaveDecoderConfig) {
    let c = cfg.channels;
    init.conv(&format!("{PREFIX}.input"), cfg.latent_channels, c, 1, 1);
    for (i, &s) in cfg.upsample_strides.iter().enumerate() {
        init.conv_transpose(&format!("{PREFIX}.up{i}"), c, c, 2 * s);
    }
    for b in 0..cfg.residual_blocks {
        let name = format!("{PREFIX}.res{b}");
        init.conv(&format!("{name}.dilated"), c, 2 * c, cfg.kernel, 1);
        init.conv(&format!("{name}.residual"), c, c, 1, 1);
        init.conv(&format!("{name}.skip"), c, cfg.skip_channels, 1, 1);
    }
    init.conv(&format!("{PREFIX}.out1"), cfg.skip_channels, cfg.skip_channels, 1, 1);
    init.conv(&format!("{PREFIX}.out2"), cfg.skip_channels, 1, 1, 1);
}

/// `[latent, frames]` to a `[1, frames * upsample_factor]` waveform in
/// `[-1, 1]`.
pub fn forward<'g>(p: &Bound<'g>, z: Var<'g>, cfg: &WaveDecoderConfig) -> Var<'g> {
    let mut x = layers::conv(p, &format!("{PREFIX}.input"), z, Conv1dSpec::valid(1));
    for (i, &s) in cfg.upsample_strides.iter().enumerate() {
        x = layers::conv_transpose(p, &format!("{PREFIX}.up{i}"), x, s).leaky_relu(UPSAMPLE_SLOPE);
    }

    let c = cfg.channels;
    let mut skips: Option<Var<'g>> = None;
    for b in 0..cfg.residual_blocks {
        let name = format!("{PREFIX}.res{b}");
        let spec = Conv1dSpec::same(cfg.kernel, cfg.dilation(b));
        let h = layers::conv(p, &format!("{name}.dilated"), x, spec);
        let gated = h.slice_rows(0, c).tanh() * h.slice_rows(c, 2 * c).sigmoid();
        let res = layers::conv(p, &format!("{name}.residual"), gated, Conv1dSpec::valid(1));
        let skip = layers::conv(p, &format!("{name}.skip"), gated, Conv1dSpec::valid(1));
        x = (x + res).scale(std::f64::consts::FRAC_1_SQRT_2);
        skips = Some(match skips {
            Some(s) => s + skip,
            None => skip,
        });
    }

    let h = match skips {
        Some(s) => s.scale(1.0 / (cfg.residual_blocks as f64).sqrt()),
        None => x,
    };
    let h = layers::conv(p, &format!("{PREFIX}.out1"), h.relu(), Conv1dSpec::valid(1)).relu();
    layers::conv(p, &format!("{PREFIX}.out2"), h, Conv1dSpec::valid(1)).tanh()
}
