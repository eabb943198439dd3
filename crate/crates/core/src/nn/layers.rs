//! Forward maps and their hand-derived adjoints.

use crate::error::{config_err, shape_err, Result};
use crate::linalg::Matrix;

/// Tiles `(y1, y2)` into non-overlapping `patch_rows × patch_cols` blocks in
/// row-major tile order. Each token is the flattened real tile followed by the
/// flattened imaginary tile.
pub fn patch_embed(y1: &Matrix, y2: &Matrix, patch_rows: usize, patch_cols: usize) -> Result<Matrix> {
    if y1.shape() != y2.shape() {
        return Err(shape_err("real and imaginary planes differ in shape"));
    }
    let (rows, cols) = y1.shape();
    if patch_rows == 0 || patch_cols == 0 || rows % patch_rows != 0 || cols % patch_cols != 0 {
        return Err(config_err(format!(
            "{patch_rows}x{patch_cols} patches do not tile a {rows}x{cols} matrix"
        )));
    }
    let (tr, tc) = (rows / patch_rows, cols / patch_cols);
    let area = patch_rows * patch_cols;
    let mut tokens = Matrix::zeros(tr * tc, 2 * area);
    for ti in 0..tr {
        for tj in 0..tc {
            let t = tokens.row_mut(ti * tc + tj);
            for r in 0..patch_rows {
                for c in 0..patch_cols {
                    let (src_r, src_c) = (ti * patch_rows + r, tj * patch_cols + c);
                    t[r * patch_cols + c] = y1[(src_r, src_c)];
                    t[area + r * patch_cols + c] = y2[(src_r, src_c)];
                }
            }
        }
    }
    Ok(tokens)
}

/// Inverse of [`patch_embed`].
pub fn unpatch(tokens: &Matrix, rows: usize, cols: usize, patch_rows: usize, patch_cols: usize) -> Result<(Matrix, Matrix)> {
    let area = patch_rows * patch_cols;
    let tc = cols / patch_cols;
    if tokens.cols() != 2 * area || tokens.rows() * area != rows * cols {
        return Err(shape_err("token matrix does not match the requested layout"));
    }
    let mut y1 = Matrix::zeros(rows, cols);
    let mut y2 = Matrix::zeros(rows, cols);
    for t in 0..tokens.rows() {
        let (ti, tj) = (t / tc, t % tc);
        for r in 0..patch_rows {
            for c in 0..patch_cols {
                let (dr, dc) = (ti * patch_rows + r, tj * patch_cols + c);
                y1[(dr, dc)] = tokens[(t, r * patch_cols + c)];
                y2[(dr, dc)] = tokens[(t, area + r * patch_cols + c)];
            }
        }
    }
    Ok((y1, y2))
}

/// Shared affine map applied to every token: `tokens · weight + bias`.
pub fn linear_project(tokens: &Matrix, weight: &Matrix, bias: &Matrix) -> Result<Matrix> {
    let mut out = tokens.matmul(weight)?;
    out.add_row_broadcast(bias)?;
    Ok(out)
}

/// Gradients of [`linear_project`]: `(d_input, d_weight, d_bias)`.
pub fn linear_backward(tokens: &Matrix, weight: &Matrix, grad_out: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    let d_in = grad_out.matmul_nt(weight)?;
    let d_w = tokens.matmul_tn(grad_out)?;
    Ok((d_in, d_w, grad_out.sum_rows()))
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
}

/// Per-token standardisation followed by the elementwise affine `(gain, shift)`.
pub fn layer_norm(tokens: &Matrix, gain: &Matrix, shift: &Matrix, eps: f64) -> Result<Matrix> {
    layer_norm_forward(tokens, gain, shift, eps).map(|(y, _)| y)
}

pub fn layer_norm_forward(tokens: &Matrix, gain: &Matrix, shift: &Matrix, eps: f64) -> Result<(Matrix, LayerNormCache)> {
    let d = tokens.cols();
    if gain.shape() != (1, d) || shift.shape() != (1, d) {
        return Err(shape_err(format!("layer norm parameters must be 1x{d}")));
    }
    let mut xhat = Matrix::zeros(tokens.rows(), d);
    let mut out = Matrix::zeros(tokens.rows(), d);
    let mut inv_std = Vec::with_capacity(tokens.rows());
    for r in 0..tokens.rows() {
        let x = tokens.row(r);
        let mean = x.iter().sum::<f64>() / d as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        let xh = xhat.row_mut(r);
        for (h, v) in xh.iter_mut().zip(x) {
            *h = (v - mean) * is;
        }
        let xh = xhat.row(r).to_vec();
        for (c, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = xh[c] * gain.as_slice()[c] + shift.as_slice()[c];
        }
    }
    Ok((out, LayerNormCache { xhat, inv_std }))
}

/// `(d_input, d_gain, d_shift)`
pub fn layer_norm_backward(cache: &LayerNormCache, gain: &Matrix, grad_out: &Matrix) -> (Matrix, Matrix, Matrix) {
    let (n, d) = grad_out.shape();
    let mut d_in = Matrix::zeros(n, d);
    let mut d_gain = Matrix::zeros(1, d);
    let d_shift = grad_out.sum_rows();
    let g = gain.as_slice();
    let mut dxhat = vec![0.0; d];
    for r in 0..n {
        let go = grad_out.row(r);
        let xh = cache.xhat.row(r);
        for c in 0..d {
            d_gain.as_mut_slice()[c] += go[c] * xh[c];
            dxhat[c] = go[c] * g[c];
        }
        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let is = cache.inv_std[r];
        for (c, o) in d_in.row_mut(r).iter_mut().enumerate() {
            *o = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
    }
    (d_in, d_gain, d_shift)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rowwise(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Single-head self-attention weights; `d_k` is the embedding width.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl AttentionLayer {
    pub fn d_k(&self) -> usize {
        self.w_q.cols()
    }

    fn check(&self, width: usize) -> Result<()> {
        for w in [&self.w_q, &self.w_k, &self.w_v] {
            if w.shape() != (width, width) {
                return Err(shape_err(format!(
                    "attention weights must be {width}x{width}, got {}x{}",
                    w.rows(),
                    w.cols()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    input: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    pub attention: Matrix,
}

/// `A = softmax(Q Kᵀ / √d_k)`, output `A V`. Returns `(output, A)`.
pub fn self_attention(tokens: &Matrix, layer: &AttentionLayer) -> Result<(Matrix, Matrix)> {
    let (out, cache) = attention_forward(tokens, layer)?;
    Ok((out, cache.attention))
}

pub fn attention_forward(tokens: &Matrix, layer: &AttentionLayer) -> Result<(Matrix, AttentionCache)> {
    layer.check(tokens.cols())?;
    let q = tokens.matmul(&layer.w_q)?;
    let k = tokens.matmul(&layer.w_k)?;
    let v = tokens.matmul(&layer.w_v)?;
    let mut scores = q.matmul_nt(&k)?;
    scores.scale_in_place(1.0 / (layer.d_k() as f64).sqrt());
    let attention = softmax_rowwise(&scores);
    let out = attention.matmul(&v)?;
    Ok((out, AttentionCache { input: tokens.clone(), q, k, v, attention }))
}

pub struct AttentionGrads {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

/// `(d_input, weight gradients)`
pub fn attention_backward(cache: &AttentionCache, layer: &AttentionLayer, grad_out: &Matrix) -> Result<(Matrix, AttentionGrads)> {
    let a = &cache.attention;
    let d_v = a.matmul_tn(grad_out)?;
    let d_a = grad_out.matmul_nt(&cache.v)?;
    // softmax adjoint, row by row: dS = A ⊙ (dA − rowsum(dA ⊙ A))
    let mut d_s = Matrix::zeros(a.rows(), a.cols());
    for r in 0..a.rows() {
        let dot: f64 = a.row(r).iter().zip(d_a.row(r)).map(|(x, y)| x * y).sum();
        for (c, o) in d_s.row_mut(r).iter_mut().enumerate() {
            *o = a[(r, c)] * (d_a[(r, c)] - dot);
        }
    }
    d_s.scale_in_place(1.0 / (layer.d_k() as f64).sqrt());
    let d_q = d_s.matmul(&cache.k)?;
    let d_k = d_s.matmul_tn(&cache.q)?;
    let x = &cache.input;
    let grads = AttentionGrads { w_q: x.matmul_tn(&d_q)?, w_k: x.matmul_tn(&d_k)?, w_v: x.matmul_tn(&d_v)? };
    let mut d_in = d_q.matmul_nt(&layer.w_q)?;
    d_in.add_assign(&d_k.matmul_nt(&layer.w_k)?)?;
    d_in.add_assign(&d_v.matmul_nt(&layer.w_v)?)?;
    Ok((d_in, grads))
}
