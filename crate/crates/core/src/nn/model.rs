//! The regression network: patch tokens → shared projection → stacked
//! `[LayerNorm → self-attention → residual]` blocks → mean pool → two-layer
//! ReLU head → `(aoa, toa)` in normalised units.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    attention_backward, attention_forward, layer_norm_backward, layer_norm_forward, linear_backward,
    linear_project, AttentionCache, AttentionLayer, LayerNormCache, LAYER_NORM_EPS,
};
use crate::error::{config_err, shape_err, Result};
use crate::linalg::Matrix;

pub const NUM_OUTPUTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// CSI rows (subcarriers) the network expects.
    pub input_rows: usize,
    /// CSI columns (antennas).
    pub input_cols: usize,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub embed_dim: usize,
    pub num_attention_blocks: usize,
    pub head_hidden: usize,
    /// Learned additive per-token embedding; off by default.
    #[serde(default)]
    pub positional_encoding: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_rows: 64,
            input_cols: 4,
            patch_rows: 8,
            patch_cols: 4,
            embed_dim: 64,
            num_attention_blocks: 2,
            head_hidden: 64,
            positional_encoding: false,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_rows == 0
            || self.patch_cols == 0
            || self.input_rows % self.patch_rows != 0
            || self.input_cols % self.patch_cols != 0
        {
            return Err(config_err(format!(
                "{}x{} patches do not tile {}x{} CSI",
                self.patch_rows, self.patch_cols, self.input_rows, self.input_cols
            )));
        }
        if self.embed_dim < 4 {
            return Err(config_err("embed_dim must be >= 4"));
        }
        if self.head_hidden == 0 {
            return Err(config_err("head_hidden must be >= 1"));
        }
        Ok(())
    }

    pub fn num_tokens(&self) -> usize {
        (self.input_rows / self.patch_rows) * (self.input_cols / self.patch_cols)
    }

    pub fn token_len(&self) -> usize {
        2 * self.patch_rows * self.patch_cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln_gain: Matrix,
    pub ln_shift: Matrix,
    pub attention: AttentionLayer,
}

/// Every trainable tensor. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub proj_weight: Matrix,
    pub proj_bias: Matrix,
    pub positional: Option<Matrix>,
    pub blocks: Vec<BlockParams>,
    pub head_w1: Matrix,
    pub head_b1: Matrix,
    pub head_w2: Matrix,
    pub head_b2: Matrix,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-a..a))
}

impl Params {
    /// Glorot-uniform matrices, zero biases, unit LayerNorm gains.
    pub fn init(cfg: &NetworkConfig, rng: &mut impl Rng) -> Self {
        let e = cfg.embed_dim;
        let proj_weight = glorot(cfg.token_len(), e, rng);
        let positional = cfg.positional_encoding.then(|| glorot(cfg.num_tokens(), e, rng));
        let blocks = (0..cfg.num_attention_blocks)
            .map(|_| BlockParams {
                ln_gain: Matrix::filled(1, e, 1.0),
                ln_shift: Matrix::zeros(1, e),
                attention: AttentionLayer { w_q: glorot(e, e, rng), w_k: glorot(e, e, rng), w_v: glorot(e, e, rng) },
            })
            .collect();
        Self {
            proj_weight,
            proj_bias: Matrix::zeros(1, e),
            positional,
            blocks,
            head_w1: glorot(e, cfg.head_hidden, rng),
            head_b1: Matrix::zeros(1, cfg.head_hidden),
            head_w2: glorot(cfg.head_hidden, NUM_OUTPUTS, rng),
            head_b2: Matrix::zeros(1, NUM_OUTPUTS),
        }
    }

    /// Tensors with stable names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("proj.weight".to_string(), &self.proj_weight), ("proj.bias".to_string(), &self.proj_bias)];
        if let Some(p) = &self.positional {
            out.push(("positional".to_string(), p));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.ln.gain"), &b.ln_gain));
            out.push((format!("block{i}.ln.shift"), &b.ln_shift));
            out.push((format!("block{i}.attn.w_q"), &b.attention.w_q));
            out.push((format!("block{i}.attn.w_k"), &b.attention.w_k));
            out.push((format!("block{i}.attn.w_v"), &b.attention.w_v));
        }
        out.push(("head.w1".to_string(), &self.head_w1));
        out.push(("head.b1".to_string(), &self.head_b1));
        out.push(("head.w2".to_string(), &self.head_w2));
        out.push(("head.b2".to_string(), &self.head_b2));
        out
    }

    /// Same order as [`Params::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.proj_weight, &mut self.proj_bias];
        if let Some(p) = &mut self.positional {
            out.push(p);
        }
        for b in &mut self.blocks {
            out.push(&mut b.ln_gain);
            out.push(&mut b.ln_shift);
            out.push(&mut b.attention.w_q);
            out.push(&mut b.attention.w_k);
            out.push(&mut b.attention.w_v);
        }
        out.extend([&mut self.head_w1, &mut self.head_b1, &mut self.head_w2, &mut self.head_b2]);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn add_assign(&mut self, other: &Params) {
        let others: Vec<&Matrix> = other.named().into_iter().map(|(_, t)| t).collect();
        for (a, b) in self.tensors_mut().into_iter().zip(others) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.scale_in_place(s);
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }

    pub(crate) fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        let e = cfg.embed_dim;
        let ok = self.proj_weight.shape() == (cfg.token_len(), e)
            && self.proj_bias.shape() == (1, e)
            && self.positional.as_ref().map(|p| p.shape()) == cfg.positional_encoding.then_some((cfg.num_tokens(), e))
            && self.blocks.len() == cfg.num_attention_blocks
            && self.blocks.iter().all(|b| {
                b.ln_gain.shape() == (1, e)
                    && b.ln_shift.shape() == (1, e)
                    && [&b.attention.w_q, &b.attention.w_k, &b.attention.w_v].iter().all(|w| w.shape() == (e, e))
            })
            && self.head_w1.shape() == (e, cfg.head_hidden)
            && self.head_b1.shape() == (1, cfg.head_hidden)
            && self.head_w2.shape() == (cfg.head_hidden, NUM_OUTPUTS)
            && self.head_b2.shape() == (1, NUM_OUTPUTS);
        if ok {
            Ok(())
        } else {
            Err(shape_err("parameter tensors do not match the network configuration"))
        }
    }
}

struct BlockCache {
    ln: LayerNormCache,
    attn: AttentionCache,
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache {
    tokens: Matrix,
    blocks: Vec<BlockCache>,
    num_tokens: usize,
    pooled: Matrix,
    hidden_pre: Matrix,
    hidden: Matrix,
    pub output: [f64; NUM_OUTPUTS],
}

impl ForwardCache {
    /// Attention map of block `i`.
    pub fn attention(&self, i: usize) -> &Matrix {
        &self.blocks[i].attn.attention
    }
}

/// Forward pass over an already-normalised token matrix.
pub fn forward(params: &Params, tokens: &Matrix) -> Result<ForwardCache> {
    let mut x = linear_project(tokens, &params.proj_weight, &params.proj_bias)?;
    if let Some(p) = &params.positional {
        x.add_assign(p)?;
    }
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for b in &params.blocks {
        let (normed, ln) = layer_norm_forward(&x, &b.ln_gain, &b.ln_shift, LAYER_NORM_EPS)?;
        let (out, attn) = attention_forward(&normed, &b.attention)?;
        x.add_assign(&out)?;
        blocks.push(BlockCache { ln, attn });
    }
    let n = x.rows();
    let mut pooled = x.sum_rows();
    pooled.scale_in_place(1.0 / n as f64);
    let hidden_pre = linear_project(&pooled, &params.head_w1, &params.head_b1)?;
    let hidden = hidden_pre.map(|v| v.max(0.0));
    let out = linear_project(&hidden, &params.head_w2, &params.head_b2)?;
    let output = [out[(0, 0)], out[(0, 1)]];
    Ok(ForwardCache { tokens: tokens.clone(), blocks, num_tokens: n, pooled, hidden_pre, hidden, output })
}

/// Gradients of a scalar loss given `∂loss/∂output`.
pub fn backward(params: &Params, cache: &ForwardCache, grad_output: [f64; NUM_OUTPUTS]) -> Result<Params> {
    let mut grads = params.zeros_like();
    let d_out = Matrix::from_vec(1, NUM_OUTPUTS, grad_output.to_vec())?;
    let (d_hidden, d_w2, d_b2) = linear_backward(&cache.hidden, &params.head_w2, &d_out)?;
    grads.head_w2 = d_w2;
    grads.head_b2 = d_b2;
    let mut d_hidden_pre = d_hidden;
    for (g, &pre) in d_hidden_pre.as_mut_slice().iter_mut().zip(cache.hidden_pre.as_slice()) {
        if pre <= 0.0 {
            *g = 0.0;
        }
    }
    let (d_pooled, d_w1, d_b1) = linear_backward(&cache.pooled, &params.head_w1, &d_hidden_pre)?;
    grads.head_w1 = d_w1;
    grads.head_b1 = d_b1;

    let n = cache.num_tokens;
    let mut d_x = Matrix::from_fn(n, d_pooled.cols(), |_, c| d_pooled[(0, c)] / n as f64);
    for (i, b) in params.blocks.iter().enumerate().rev() {
        let bc = &cache.blocks[i];
        let (d_normed, attn_grads) = attention_backward(&bc.attn, &b.attention, &d_x)?;
        let (d_in, d_gain, d_shift) = layer_norm_backward(&bc.ln, &b.ln_gain, &d_normed);
        d_x.add_assign(&d_in)?;
        let g = &mut grads.blocks[i];
        g.ln_gain = d_gain;
        g.ln_shift = d_shift;
        g.attention = AttentionLayer { w_q: attn_grads.w_q, w_k: attn_grads.w_k, w_v: attn_grads.w_v };
    }
    if params.positional.is_some() {
        grads.positional = Some(d_x.clone());
    }
    let (_, d_pw, d_pb) = linear_backward(&cache.tokens, &params.proj_weight, &d_x)?;
    grads.proj_weight = d_pw;
    grads.proj_bias = d_pb;
    Ok(grads)
}

/// Mean squared error over the outputs, and its gradient.
pub fn mse_loss(pred: [f64; NUM_OUTPUTS], label: [f64; NUM_OUTPUTS]) -> (f64, [f64; NUM_OUTPUTS]) {
    let diff = [pred[0] - label[0], pred[1] - label[1]];
    let loss = (diff[0] * diff[0] + diff[1] * diff[1]) / NUM_OUTPUTS as f64;
    let scale = 2.0 / NUM_OUTPUTS as f64;
    (loss, [scale * diff[0], scale * diff[1]])
}
