//! Mini-batch Adam training of one network on one dataset partition.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::checkpoint::{raw_tokens, AoaTarget, standardize, InputNorm, LabelNorm, ModelCheckpoint, RegionTag, TrainingMeta};
use super::model::{backward, forward, mse_loss, NetworkConfig, Params};
use super::optim::{Adam, AdamConfig};
use crate::error::{config_err, Error, Result};
use crate::linalg::Matrix;
use crate::signal::CsiSample;

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Share of the samples held out to pick the best epoch; 0 disables it
    /// and keeps the last epoch's parameters.
    pub validation_fraction: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { epochs: 60, batch_size: 32, learning_rate: 1e-3, seed: 0, validation_fraction: 0.0 }
    }
}

fn input_norm(tokens: &[Matrix]) -> InputNorm {
    let len = tokens[0].as_slice().len();
    let n = tokens.len() as f64;
    let mut mean = vec![0.0; len];
    for t in tokens {
        for (m, v) in mean.iter_mut().zip(t.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for t in tokens {
        for ((s, v), m) in var.iter_mut().zip(t.as_slice()).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
    InputNorm { mean, std }
}

fn label_norm(samples: &[&CsiSample], target: AoaTarget) -> LabelNorm {
    let n = samples.len() as f64;
    let stats = |f: &dyn Fn(&CsiSample) -> f64| {
        let mean = samples.iter().map(|s| f(s)).sum::<f64>() / n;
        let std = (samples.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / n).sqrt();
        (mean, if std > 0.0 { std } else { 1.0 })
    };
    let (aoa_mean, aoa_std) = stats(&|s| target.label(s.truth.aoa_deg));
    let (toa_mean, toa_std) = stats(&|s| s.truth.toa_s);
    LabelNorm { aoa_mean, aoa_std, toa_mean, toa_std }
}

/// Trains one network. `on_epoch(epoch, mean_loss)` is called after every
/// epoch with a 1-based epoch index.
pub fn train_with_progress(
    samples: &[&CsiSample],
    cfg: &NetworkConfig,
    hp: &TrainParams,
    region: RegionTag,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<ModelCheckpoint> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(config_err(format!("cannot train the {region} network on an empty partition")));
    }
    if hp.batch_size == 0 {
        return Err(config_err("batch_size must be >= 1"));
    }
    if !(0.0..1.0).contains(&hp.validation_fraction) {
        return Err(config_err("validation_fraction must be in [0, 1)"));
    }
    let mut split_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    split_rng.set_stream(SPLIT_STREAM);
    let held_out = (samples.len() as f64 * hp.validation_fraction).floor() as usize;
    let (fit_idx, val_idx) = if held_out > 0 && held_out < samples.len() {
        let mut idx: Vec<usize> = (0..samples.len()).collect();
        idx.shuffle(&mut split_rng);
        let val = idx.split_off(samples.len() - held_out);
        (idx, val)
    } else {
        ((0..samples.len()).collect(), Vec::new())
    };
    let fit: Vec<&CsiSample> = fit_idx.iter().map(|&i| samples[i]).collect();

    let mut tokens: Vec<Matrix> = samples.iter().map(|s| raw_tokens(&s.matrix, cfg)).collect::<Result<_>>()?;
    let fit_tokens: Vec<Matrix> = fit_idx.iter().map(|&i| tokens[i].clone()).collect();
    let norm = input_norm(&fit_tokens);
    drop(fit_tokens);
    tokens.iter_mut().for_each(|t| standardize(t, &norm));
    let target = region.aoa_target();
    let labels_norm = label_norm(&fit, target);
    let labels: Vec<[f64; 2]> =
        samples.iter().map(|s| labels_norm.normalize(target.label(s.truth.aoa_deg), s.truth.toa_s)).collect();

    let mut init_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut params = Params::init(cfg, &mut init_rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut adam = Adam::new(&params, AdamConfig { learning_rate: hp.learning_rate, ..AdamConfig::default() });

    let mut order = fit_idx.clone();
    let mut history = Vec::with_capacity(hp.epochs);
    let mut val_history = Vec::new();
    let mut best: Option<(usize, f64, Params)> = None;
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let per_sample: Vec<(f64, Params)> = batch
                .par_iter()
                .map(|&i| {
                    let cache = forward(&params, &tokens[i])?;
                    let (loss, g_out) = mse_loss(cache.output, labels[i]);
                    Ok((loss, backward(&params, &cache, g_out)?))
                })
                .collect::<Result<_>>()?;
            // reduce in batch order so the sum is independent of scheduling
            let mut grads = params.zeros_like();
            for (loss, g) in &per_sample {
                epoch_loss += loss;
                grads.add_assign(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads);
        }
        let mean_loss = epoch_loss / order.len() as f64;
        if !mean_loss.is_finite() || !params.is_finite() {
            return Err(Error::Numeric(format!("training diverged at epoch {epoch} (loss {mean_loss})")));
        }
        history.push(mean_loss);
        if !val_idx.is_empty() {
            let val = mean_token_loss(&params, &tokens, &labels, &val_idx)?;
            val_history.push(val);
            if best.as_ref().map_or(true, |(_, b, _)| val < *b) {
                best = Some((epoch, val, params.clone()));
            }
        }
        on_epoch(epoch, mean_loss);
    }
    let best_epoch = best.map(|(epoch, _, p)| {
        params = p;
        epoch
    });

    Ok(ModelCheckpoint {
        config: *cfg,
        params,
        input_norm: norm,
        label_norm: labels_norm,
        region,
        aoa_target: target,
        meta: TrainingMeta {
            seed: hp.seed,
            epochs: hp.epochs,
            batch_size: hp.batch_size,
            learning_rate: hp.learning_rate,
            num_samples: samples.len(),
            validation_samples: val_idx.len(),
            final_loss: history.last().copied(),
            loss_history: history,
            validation_history: val_history,
            best_epoch,
        },
    })
}

fn mean_token_loss(params: &Params, tokens: &[Matrix], labels: &[[f64; 2]], idx: &[usize]) -> Result<f64> {
    let losses: Vec<f64> = idx
        .par_iter()
        .map(|&i| Ok(mse_loss(forward(params, &tokens[i])?.output, labels[i]).0))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / idx.len() as f64)
}

pub fn train(samples: &[&CsiSample], cfg: &NetworkConfig, hp: &TrainParams, region: RegionTag) -> Result<ModelCheckpoint> {
    train_with_progress(samples, cfg, hp, region, |epoch, loss| log::info!("{region} epoch {epoch} loss {loss:.6}"))
}

/// Mean loss of a checkpoint over `samples`, in normalised label units.
pub fn evaluate_loss(ckpt: &ModelCheckpoint, samples: &[&CsiSample]) -> Result<f64> {
    let total: f64 = samples
        .par_iter()
        .map(|s| {
            let out = ckpt.forward_tokens(&ckpt.tokens(&s.matrix)?)?;
            Ok(mse_loss(out, ckpt.label_norm.normalize(ckpt.aoa_target.label(s.truth.aoa_deg), s.truth.toa_s)).0)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(total / samples.len() as f64)
}
