//! Parameterized building blocks shared by the networks.
//!
//! Each block has an `init_*` function that creates its tensors in a
//! [`ParameterStore`] under a name prefix, and a forward function that reads
//! them back from a [`Bound`] store. Sequences are `[channels, time]`.

use ktts_tensor::{concat_rows, Bound, Conv1dSpec, ParameterStore, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::TransformerConfig;

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;
pub(crate) const PRELU_INIT: f64 = 0.25;

/// Parameter initializer: fan-in scaled uniform weights, zero biases.
pub struct Init<'a> {
    pub store: &'a mut ParameterStore,
    pub rng: &'a mut ChaCha8Rng,
}

impl Init<'_> {
    fn put(&mut self, name: String, t: Tensor) {
        self.store
            .insert(name.clone(), t)
            .unwrap_or_else(|e| panic!("initializing `{name}`: {e}"));
    }

    /// Uniform in `±1/sqrt(fan_in)`.
    pub fn fan_in(&mut self, name: String, shape: &[usize], fan_in: usize) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let t = Tensor::from_fn(shape, |_| self.rng.random_range(-bound..bound));
        self.put(name, t);
    }

    pub fn normal(&mut self, name: String, shape: &[usize], std: f64) {
        let dist = Normal::new(0.0, std).expect("valid std");
        let t = Tensor::from_fn(shape, |_| dist.sample(self.rng));
        self.put(name, t);
    }

    pub fn constant(&mut self, name: String, shape: &[usize], value: f64) {
        self.put(name, Tensor::full(shape, value));
    }

    pub fn conv(&mut self, name: &str, c_in: usize, c_out: usize, kernel: usize, groups: usize) {
        self.fan_in(format!("{name}.weight"), &[c_out, c_in / groups, kernel], c_in / groups * kernel);
        self.constant(format!("{name}.bias"), &[c_out], 0.0);
    }

    pub fn conv_transpose(&mut self, name: &str, c_in: usize, c_out: usize, kernel: usize) {
        self.fan_in(format!("{name}.weight"), &[c_in, c_out, kernel], c_in * kernel);
        self.constant(format!("{name}.bias"), &[c_out], 0.0);
    }

    pub fn linear(&mut self, name: &str, d_in: usize, d_out: usize) {
        self.fan_in(format!("{name}.weight"), &[d_out, d_in], d_in);
        self.constant(format!("{name}.bias"), &[d_out], 0.0);
    }

    pub fn layer_norm(&mut self, name: &str, dim: usize) {
        self.constant(format!("{name}.gain"), &[dim], 1.0);
        self.constant(format!("{name}.bias"), &[dim], 0.0);
    }

    pub fn prelu(&mut self, name: &str) {
        self.constant(format!("{name}.alpha"), &[1], PRELU_INIT);
    }
}

pub fn conv<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, spec: Conv1dSpec) -> Var<'g> {
    x.conv1d(p.get(&format!("{name}.weight")), spec)
        .add_col(p.get(&format!("{name}.bias")))
}

pub fn conv_transpose<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, stride: usize) -> Var<'g> {
    x.conv_transpose1d(p.get(&format!("{name}.weight")), stride)
        .add_col(p.get(&format!("{name}.bias")))
}

/// Per-frame affine map `W x + b`.
pub fn linear<'g>(p: &Bound<'g>, name: &str, x: Var<'g>) -> Var<'g> {
    p.get(&format!("{name}.weight"))
        .matmul(x)
        .add_col(p.get(&format!("{name}.bias")))
}

/// Normalizes each frame across channels, then applies gain and bias.
pub fn layer_norm<'g>(p: &Bound<'g>, name: &str, x: Var<'g>) -> Var<'g> {
    x.normalize_cols(LAYER_NORM_EPS)
        .mul_col(p.get(&format!("{name}.gain")))
        .add_col(p.get(&format!("{name}.bias")))
}

pub fn prelu<'g>(p: &Bound<'g>, name: &str, x: Var<'g>) -> Var<'g> {
    x.prelu(p.get(&format!("{name}.alpha")))
}

pub fn init_attention(init: &mut Init<'_>, name: &str, dim: usize) {
    for proj in ["query", "key", "value", "out"] {
        init.linear(&format!("{name}.{proj}"), dim, dim);
    }
}

/// Multi-head scaled dot-product self-attention over frames.
pub fn attention<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, heads: usize) -> Var<'g> {
    let dim = x.value().rows();
    let head_dim = dim / heads;
    let q = linear(p, &format!("{name}.query"), x);
    let k = linear(p, &format!("{name}.key"), x);
    let v = linear(p, &format!("{name}.value"), x);
    let scale = 1.0 / (head_dim as f64).sqrt();
    let outputs: Vec<Var<'g>> = (0..heads)
        .map(|h| {
            let rows = h * head_dim..(h + 1) * head_dim;
            let qh = q.slice_rows(rows.start, rows.end);
            let kh = k.slice_rows(rows.start, rows.end);
            let vh = v.slice_rows(rows.start, rows.end);
            // [queries, keys]
            let weights = qh.transpose().matmul(kh).scale(scale).softmax_rows();
            vh.matmul(weights.transpose())
        })
        .collect();
    linear(p, &format!("{name}.out"), concat_rows(&outputs))
}

pub fn init_transformer_block(init: &mut Init<'_>, name: &str, cfg: &TransformerConfig) {
    init.layer_norm(&format!("{name}.norm1"), cfg.model_dim);
    init_attention(init, &format!("{name}.attn"), cfg.model_dim);
    init.layer_norm(&format!("{name}.norm2"), cfg.model_dim);
    init.linear(&format!("{name}.ffn1"), cfg.model_dim, cfg.ffn_dim);
    init.linear(&format!("{name}.ffn2"), cfg.ffn_dim, cfg.model_dim);
}

/// Pre-norm encoder block: attention and feed-forward sublayers, each added
/// back onto the residual stream.
pub fn transformer_block<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, cfg: &TransformerConfig) -> Var<'g> {
    let h = layer_norm(p, &format!("{name}.norm1"), x);
    let x = x + attention(p, &format!("{name}.attn"), h, cfg.n_heads);
    let h = layer_norm(p, &format!("{name}.norm2"), x);
    let h = linear(p, &format!("{name}.ffn1"), h).relu();
    x + linear(p, &format!("{name}.ffn2"), h)
}

pub fn init_positional(init: &mut Init<'_>, name: &str, cfg: &TransformerConfig) {
    init.conv(
        &format!("{name}.conv"),
        cfg.model_dim,
        cfg.pos_channels,
        cfg.pos_kernel,
        cfg.pos_groups,
    );
    init.linear(&format!("{name}.proj"), cfg.pos_channels, cfg.model_dim);
}

/// Relative positional vector from a grouped convolution over the sequence,
/// projected back to the model width.
pub fn positional<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, cfg: &TransformerConfig) -> Var<'g> {
    let spec = Conv1dSpec::same(cfg.pos_kernel, 1).with_groups(cfg.pos_groups);
    let pos = conv(p, &format!("{name}.conv"), x, spec);
    linear(p, &format!("{name}.proj"), pos)
}

pub fn init_transformer_stack(init: &mut Init<'_>, name: &str, cfg: &TransformerConfig) {
    init_positional(init, &format!("{name}.pos"), cfg);
    for b in 0..cfg.n_blocks {
        init_transformer_block(init, &format!("{name}.block{b}"), cfg);
    }
    init.layer_norm(&format!("{name}.final_norm"), cfg.model_dim);
}

/// Positional vector added to the input, then the block stack and a final
/// normalization.
pub fn transformer_stack<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, cfg: &TransformerConfig) -> Var<'g> {
    let mut h = x + positional(p, &format!("{name}.pos"), x, cfg);
    for b in 0..cfg.n_blocks {
        h = transformer_block(p, &format!("{name}.block{b}"), h, cfg);
    }
    layer_norm(p, &format!("{name}.final_norm"), h)
}
