//! Monte-Carlo evaluation: SNR sweeps, RMSE tables, error CDFs and reports.

mod report;
mod svg;

pub use report::{emit_report, REPORT_FILES};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::estimator::{music_baseline, predict, predict_single, EstimateRecord, Method, MusicOptions, RegionPair};
use crate::nn::ModelCheckpoint;
use crate::seed::derive_seed;
use crate::signal::{synthesize_csi, CsiSample, SignalConfig, TargetTruth};

const SWEEP_STREAM: u64 = 0x5357_4545_50;

/// `sqrt(mean(e²))`
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Domain("rmse of an empty error list".into()));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Fraction of `|errors|` that are `≤ x`.
pub fn empirical_cdf(errors: &[f64], x: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Domain("cdf of an empty error list".into()));
    }
    Ok(errors.iter().filter(|e| e.abs() <= x).count() as f64 / errors.len() as f64)
}

/// Nearest-rank percentile of an ascending list, `q` in (0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Domain("percentile of an empty list".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("percentile level must be in (0, 1], got {q}")));
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub snr_points: Vec<f64>,
    pub trials_per_point: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Targets are drawn uniformly from these intervals.
    pub aoa_deg: [f64; 2],
    pub range_m: [f64; 2],
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            snr_points: (0..9).map(|i| -10.0 + 5.0 * f64::from(i)).collect(),
            trials_per_point: 500,
            methods: vec![Method::Music, Method::TransformerSingle, Method::TransformerRegion],
            seed: 0,
            aoa_deg: [-60.0, 60.0],
            range_m: [3.0, 10.0],
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_points.is_empty() {
            return Err(config_err("sweep needs at least one SNR point"));
        }
        if let Some(s) = self.snr_points.iter().find(|s| !s.is_finite()) {
            return Err(config_err(format!("sweep SNR points must be finite, got {s}")));
        }
        if self.trials_per_point == 0 {
            return Err(config_err("trials_per_point must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err("sweep needs at least one method"));
        }
        for (name, [lo, hi]) in [("aoa_deg", self.aoa_deg), ("range_m", self.range_m)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(config_err(format!("sweep {name} interval [{lo}, {hi}] is invalid")));
            }
        }
        if self.range_m[0] <= 0.0 {
            return Err(config_err("sweep ranges must be positive"));
        }
        Ok(())
    }

    /// The sample evaluated at SNR point `point`, trial `trial`.
    pub fn sample(&self, point: usize, trial: usize, cfg: &SignalConfig) -> Result<CsiSample> {
        let snr = *self.snr_points.get(point).ok_or(Error::Index { index: point, max: self.snr_points.len() })?;
        let seed = self.trial_seed(point, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aoa = rng.gen_range(self.aoa_deg[0]..=self.aoa_deg[1]);
        let range = rng.gen_range(self.range_m[0]..=self.range_m[1]);
        synthesize_csi(&TargetTruth::new(aoa, range, cfg.convention), snr, cfg, seed)
    }

    /// Seed of trial `trial` at SNR point `point`.
    pub fn trial_seed(&self, point: usize, trial: usize) -> u64 {
        derive_seed(derive_seed(self.seed, SWEEP_STREAM), ((point as u64) << 32) | trial as u64)
    }
}

/// Trained models available to a sweep.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub single: Option<ModelCheckpoint>,
    pub pair: Option<RegionPair>,
    pub music: MusicOptions,
}

impl Artifacts {
    fn check(&self, methods: &[Method]) -> Result<()> {
        for m in methods {
            let missing = match m {
                Method::TransformerSingle => self.single.is_none(),
                Method::TransformerRegion => self.pair.is_none(),
                Method::Music | Method::MusicCalibrated => false,
            };
            if missing {
                return Err(config_err(format!("method {m} needs a trained checkpoint")));
            }
        }
        Ok(())
    }

    pub fn estimate(&self, method: Method, sample: &CsiSample, cfg: &SignalConfig) -> Result<EstimateRecord> {
        let absent = || config_err(format!("method {method} needs a trained checkpoint"));
        match method {
            Method::Music => music_baseline(sample, cfg, &self.music, false),
            Method::MusicCalibrated => music_baseline(sample, cfg, &self.music, true),
            Method::TransformerSingle => predict_single(sample, self.single.as_ref().ok_or_else(absent)?, cfg),
            Method::TransformerRegion => predict(sample, self.pair.as_ref().ok_or_else(absent)?, cfg),
        }
    }
}

/// RMSEs of one method at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: Method,
    pub snr_db: f64,
    pub count: usize,
    pub rmse_aoa_deg: f64,
    pub rmse_toa_ns: f64,
    pub rmse_pos_m: f64,
}

/// Absolute errors of one method over all SNR points, ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodErrors {
    pub aoa_deg: Vec<f64>,
    pub toa_ns: Vec<f64>,
    pub pos_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    /// Method-major, then SNR in sweep order.
    pub rows: Vec<MetricRow>,
    pub errors: BTreeMap<Method, MethodErrors>,
}

/// Signed ToA error in nanoseconds, as used in every report.
pub fn toa_error_ns(r: &EstimateRecord) -> f64 {
    r.toa_error_s() * 1e9
}

impl MetricTable {
    /// Groups `records` by method and exact SNR. `methods` and `snr_points`
    /// fix the row order; combinations without records are skipped.
    pub fn from_records(records: &[EstimateRecord], methods: &[Method], snr_points: &[f64]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut errors = BTreeMap::new();
        for &method in methods {
            let mine: Vec<&EstimateRecord> = records.iter().filter(|r| r.method == method).collect();
            if mine.is_empty() {
                continue;
            }
            for &snr in snr_points {
                let at: Vec<&EstimateRecord> = mine.iter().copied().filter(|r| r.snr_db == Some(snr)).collect();
                if at.is_empty() {
                    continue;
                }
                let aoa: Vec<f64> = at.iter().map(|r| r.aoa_error_deg()).collect();
                let toa: Vec<f64> = at.iter().map(|r| toa_error_ns(r)).collect();
                let pos: Vec<f64> = at.iter().map(|r| r.position_error_m()).collect();
                rows.push(MetricRow {
                    method,
                    snr_db: snr,
                    count: at.len(),
                    rmse_aoa_deg: rmse(&aoa)?,
                    rmse_toa_ns: rmse(&toa)?,
                    rmse_pos_m: rmse(&pos)?,
                });
            }
            let sorted_abs = |f: &dyn Fn(&EstimateRecord) -> f64| {
                let mut v: Vec<f64> = mine.iter().map(|r| f(r).abs()).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            errors.insert(
                method,
                MethodErrors {
                    aoa_deg: sorted_abs(&|r| r.aoa_error_deg()),
                    toa_ns: sorted_abs(&toa_error_ns),
                    pos_m: sorted_abs(&|r| r.position_error_m()),
                },
            );
        }
        Ok(Self { rows, errors })
    }

    pub fn methods(&self) -> Vec<Method> {
        self.errors.keys().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by SNR point, then trial, then method in spec order.
    pub records: Vec<EstimateRecord>,
    pub table: MetricTable,
}

/// Synthesises a fresh sample for every (SNR, trial) pair and runs every
/// method on it.
pub fn run_sweep(spec: &SweepSpec, cfg: &SignalConfig, artifacts: &Artifacts) -> Result<SweepResult> {
    spec.validate()?;
    cfg.validate()?;
    artifacts.check(&spec.methods)?;
    let jobs: Vec<(usize, usize)> = (0..spec.snr_points.len())
        .flat_map(|p| (0..spec.trials_per_point).map(move |t| (p, t)))
        .collect();
    let per_trial: Vec<Vec<EstimateRecord>> = jobs
        .par_iter()
        .map(|&(point, trial)| {
            let sample = spec.sample(point, trial, cfg)?;
            spec.methods.iter().map(|&m| artifacts.estimate(m, &sample, cfg)).collect()
        })
        .collect::<Result<_>>()?;
    let records: Vec<EstimateRecord> = per_trial.into_iter().flatten().collect();
    let table = MetricTable::from_records(&records, &spec.methods, &spec.snr_points)?;
    Ok(SweepResult { records, table })
}
