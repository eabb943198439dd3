//! Trained-model bundle and its JSON persistence.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::layers::{patch_embed, AttentionLayer};
use super::model::{forward, BlockParams, NetworkConfig, Params, NUM_OUTPUTS};
use crate::error::{shape_err, Error, Result};
use crate::linalg::{CMatrix, Matrix};
use crate::signal::split_real_imag;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Which part of the angle range a network was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    Small,
    Large,
    Full,
}

impl std::fmt::Display for RegionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegionTag::Small => "small",
            RegionTag::Large => "large",
            RegionTag::Full => "full",
        })
    }
}

/// What the angle output regresses. The large region is two disjoint
/// intervals of opposite sign, so its network learns `|aoa|` and the caller
/// supplies the sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AoaTarget {
    Signed,
    Magnitude,
}

impl AoaTarget {
    pub fn label(self, aoa_deg: f64) -> f64 {
        match self {
            AoaTarget::Signed => aoa_deg,
            AoaTarget::Magnitude => aoa_deg.abs(),
        }
    }
}

impl RegionTag {
    pub fn aoa_target(self) -> AoaTarget {
        match self {
            RegionTag::Large => AoaTarget::Magnitude,
            RegionTag::Small | RegionTag::Full => AoaTarget::Signed,
        }
    }
}

/// Per-feature standardisation of the flattened token matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// `label_norm = (label − mean) / std` for aoa (degrees) and toa (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelNorm {
    pub aoa_mean: f64,
    pub aoa_std: f64,
    pub toa_mean: f64,
    pub toa_std: f64,
}

impl LabelNorm {
    pub fn normalize(&self, aoa_deg: f64, toa_s: f64) -> [f64; NUM_OUTPUTS] {
        [(aoa_deg - self.aoa_mean) / self.aoa_std, (toa_s - self.toa_mean) / self.toa_std]
    }

    pub fn denormalize(&self, out: [f64; NUM_OUTPUTS]) -> (f64, f64) {
        (out[0] * self.aoa_std + self.aoa_mean, out[1] * self.toa_std + self.toa_mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub num_samples: usize,
    /// Samples held out from gradient steps to select `best_epoch`.
    #[serde(default)]
    pub validation_samples: usize,
    /// Mean training loss of the last epoch; `None` when untrained.
    pub final_loss: Option<f64>,
    pub loss_history: Vec<f64>,
    #[serde(default)]
    pub validation_history: Vec<f64>,
    /// Epoch whose parameters were kept; `None` means the last one.
    #[serde(default)]
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: NetworkConfig,
    pub params: Params,
    pub input_norm: InputNorm,
    pub label_norm: LabelNorm,
    pub region: RegionTag,
    pub aoa_target: AoaTarget,
    pub meta: TrainingMeta,
}

impl ModelCheckpoint {
    /// Standardised token matrix for a CSI sample.
    pub fn tokens(&self, csi: &CMatrix) -> Result<Matrix> {
        sample_tokens(csi, &self.config, &self.input_norm)
    }

    /// Network output in normalised label units.
    pub fn forward_tokens(&self, tokens: &Matrix) -> Result<[f64; NUM_OUTPUTS]> {
        Ok(forward(&self.params, tokens)?.output)
    }

    /// `(aoa_deg, toa_s)`; the angle is `|aoa|` when `aoa_target` is
    /// `Magnitude`.
    pub fn predict(&self, csi: &CMatrix) -> Result<(f64, f64)> {
        let out = self.forward_tokens(&self.tokens(csi)?)?;
        Ok(self.label_norm.denormalize(out))
    }

    pub fn attention_maps(&self, csi: &CMatrix) -> Result<Vec<Matrix>> {
        let cache = forward(&self.params, &self.tokens(csi)?)?;
        Ok((0..self.config.num_attention_blocks).map(|i| cache.attention(i).clone()).collect())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &CheckpointDoc::from(self))?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_reader(input)?;
        doc.try_into()
    }
}

pub(crate) fn raw_tokens(csi: &CMatrix, cfg: &NetworkConfig) -> Result<Matrix> {
    if csi.shape() != (cfg.input_rows, cfg.input_cols) {
        return Err(shape_err(format!(
            "network expects {}x{} CSI, got {}x{}",
            cfg.input_rows,
            cfg.input_cols,
            csi.rows(),
            csi.cols()
        )));
    }
    let (y1, y2) = split_real_imag(csi);
    patch_embed(&y1, &y2, cfg.patch_rows, cfg.patch_cols)
}

pub(crate) fn standardize(tokens: &mut Matrix, norm: &InputNorm) {
    for ((v, m), s) in tokens.as_mut_slice().iter_mut().zip(&norm.mean).zip(&norm.std) {
        *v = (*v - m) / s;
    }
}

pub(crate) fn sample_tokens(csi: &CMatrix, cfg: &NetworkConfig, norm: &InputNorm) -> Result<Matrix> {
    let mut t = raw_tokens(csi, cfg)?;
    if norm.mean.len() != t.as_slice().len() {
        return Err(shape_err("input normalisation does not match the token layout"));
    }
    standardize(&mut t, norm);
    Ok(t)
}

/// Element-wise mean of the first block's attention map over `samples`.
pub fn export_attention<'a>(ckpt: &ModelCheckpoint, samples: impl IntoIterator<Item = &'a CMatrix>) -> Result<Matrix> {
    if ckpt.config.num_attention_blocks == 0 {
        return Err(Error::Config("network has no attention blocks".into()));
    }
    let n = ckpt.config.num_tokens();
    let mut sum = Matrix::zeros(n, n);
    let mut count = 0usize;
    for csi in samples {
        let cache = forward(&ckpt.params, &ckpt.tokens(csi)?)?;
        sum.add_assign(cache.attention(0))?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Config("no samples to average attention over".into()));
    }
    sum.scale_in_place(1.0 / count as f64);
    Ok(sum)
}

/// Square heatmap CSV: header `query_token,key_0,…`, one row per query token.
pub fn write_attention_csv<W: Write>(map: &Matrix, mut out: W) -> Result<()> {
    let header: Vec<String> = (0..map.cols()).map(|j| format!("key_{j}")).collect();
    writeln!(out, "query_token,{}", header.join(","))?;
    for r in 0..map.rows() {
        let row: Vec<String> = map.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{r},{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDoc {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    schema_version: u32,
    region: RegionTag,
    aoa_target: AoaTarget,
    config: NetworkConfig,
    input_norm: InputNorm,
    label_norm: LabelNorm,
    metadata: TrainingMeta,
    tensors: Vec<TensorDoc>,
}

impl From<&ModelCheckpoint> for CheckpointDoc {
    fn from(c: &ModelCheckpoint) -> Self {
        let tensors = c
            .params
            .named()
            .into_iter()
            .map(|(name, t)| TensorDoc { name, rows: t.rows(), cols: t.cols(), data: t.as_slice().to_vec() })
            .collect();
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            region: c.region,
            aoa_target: c.aoa_target,
            config: c.config,
            input_norm: c.input_norm.clone(),
            label_norm: c.label_norm,
            metadata: c.meta.clone(),
            tensors,
        }
    }
}

impl TryFrom<CheckpointDoc> for ModelCheckpoint {
    type Error = Error;

    fn try_from(doc: CheckpointDoc) -> Result<Self> {
        if doc.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint schema_version {}", doc.schema_version)));
        }
        doc.config.validate()?;
        let mut by_name: BTreeMap<String, Matrix> = BTreeMap::new();
        for t in doc.tensors {
            let m = Matrix::from_vec(t.rows, t.cols, t.data).map_err(|e| Error::Format(format!("{}: {e}", t.name)))?;
            if by_name.insert(t.name.clone(), m).is_some() {
                return Err(Error::Format(format!("duplicate tensor {}", t.name)));
            }
        }
        let mut take = |name: &str| by_name.remove(name).ok_or_else(|| Error::Format(format!("missing tensor {name}")));
        let cfg = doc.config;
        let proj_weight = take("proj.weight")?;
        let proj_bias = take("proj.bias")?;
        let positional = if cfg.positional_encoding { Some(take("positional")?) } else { None };
        let mut blocks = Vec::with_capacity(cfg.num_attention_blocks);
        for i in 0..cfg.num_attention_blocks {
            blocks.push(BlockParams {
                ln_gain: take(&format!("block{i}.ln.gain"))?,
                ln_shift: take(&format!("block{i}.ln.shift"))?,
                attention: AttentionLayer {
                    w_q: take(&format!("block{i}.attn.w_q"))?,
                    w_k: take(&format!("block{i}.attn.w_k"))?,
                    w_v: take(&format!("block{i}.attn.w_v"))?,
                },
            });
        }
        let params = Params {
            proj_weight,
            proj_bias,
            positional,
            blocks,
            head_w1: take("head.w1")?,
            head_b1: take("head.b1")?,
            head_w2: take("head.w2")?,
            head_b2: take("head.b2")?,
        };
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Format(format!("unexpected tensor {extra}")));
        }
        params.check(&cfg).map_err(|e| Error::Format(e.to_string()))?;
        let features = cfg.num_tokens() * cfg.token_len();
        if doc.input_norm.mean.len() != features || doc.input_norm.std.len() != features {
            return Err(Error::Format("input normalisation length does not match the token layout".into()));
        }
        Ok(Self {
            config: cfg,
            params,
            input_norm: doc.input_norm,
            label_norm: doc.label_norm,
            region: doc.region,
            aoa_target: doc.aoa_target,
            meta: doc.metadata,
        })
    }
}
