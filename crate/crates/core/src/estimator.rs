//! Region-split estimation pipeline: partitioning, paired training, MUSIC
//! routing, MUSIC baselines and position conversion.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::linalg::CMatrix;
use crate::nn::{train, AoaTarget, ModelCheckpoint, NetworkConfig, RegionTag, TrainParams};
use crate::seed::derive_seed;
use crate::signal::{polar_to_xy, CsiSample, ImpairmentProfile, SignalConfig, TargetTruth};
use crate::subspace::{
    angle_grid, default_delay_grid, delay_grid, delay_music_spectrum, joint_music_2d, music_angle_spectrum,
    region_decide_with_angle, region_for_angle, spatial_covariance, JointMusicConfig, Region, REGION_BOUNDARY_DEG,
};

const SMALL_SEED_STREAM: u64 = 1;
const LARGE_SEED_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Music,
    /// MUSIC re-run after dividing out the impairment at the first estimate.
    MusicCalibrated,
    TransformerSingle,
    TransformerRegion,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::Music, Method::MusicCalibrated, Method::TransformerSingle, Method::TransformerRegion];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Music => "music",
            Method::MusicCalibrated => "music_calibrated",
            Method::TransformerSingle => "transformer_single",
            Method::TransformerRegion => "transformer_region",
        }
    }

    pub fn needs_checkpoint(self) -> bool {
        matches!(self, Method::TransformerSingle | Method::TransformerRegion)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| config_err(format!("unknown method {s:?}")))
    }
}

/// Splits by `|aoa| ≤ boundary` (small) versus the rest (large).
pub fn partition_dataset(samples: &[CsiSample], boundary_deg: f64) -> (Vec<&CsiSample>, Vec<&CsiSample>) {
    samples.iter().partition(|s| region_for_angle(s.truth.aoa_deg, boundary_deg) == Region::Small)
}

/// The two region networks. A side is `None` when its partition was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPair {
    pub small: Option<ModelCheckpoint>,
    pub large: Option<ModelCheckpoint>,
    pub boundary_deg: f64,
}

impl RegionPair {
    pub fn new(small: Option<ModelCheckpoint>, large: Option<ModelCheckpoint>, boundary_deg: f64) -> Result<Self> {
        for (ckpt, tag) in [(&small, RegionTag::Small), (&large, RegionTag::Large)] {
            if let Some(c) = ckpt {
                if c.region != tag {
                    return Err(config_err(format!("{tag} slot holds a {} checkpoint", c.region)));
                }
            }
        }
        if small.is_none() && large.is_none() {
            return Err(config_err("region pair has no trained network"));
        }
        Ok(Self { small, large, boundary_deg })
    }

    /// Network for `region`, falling back to the other side if it is missing.
    pub fn network(&self, region: Region) -> &ModelCheckpoint {
        let (want, other) = match region {
            Region::Small => (&self.small, &self.large),
            Region::Large => (&self.large, &self.small),
        };
        want.as_ref().or(other.as_ref()).expect("constructor guarantees one network")
    }
}

/// Training seeds of the small and large networks for a master seed.
pub fn region_seeds(master: u64) -> (u64, u64) {
    (derive_seed(master, SMALL_SEED_STREAM), derive_seed(master, LARGE_SEED_STREAM))
}

/// Trains both region networks concurrently. `hp.seed` is the master seed.
pub fn train_parallel(samples: &[CsiSample], cfg: &NetworkConfig, hp: &TrainParams) -> Result<RegionPair> {
    let (small, large) = partition_dataset(samples, REGION_BOUNDARY_DEG);
    let (small_seed, large_seed) = region_seeds(hp.seed);
    let fit = |part: &[&CsiSample], seed: u64, tag: RegionTag| -> Result<Option<ModelCheckpoint>> {
        if part.is_empty() {
            log::warn!("{tag} partition is empty; skipping that network");
            return Ok(None);
        }
        train(part, cfg, &TrainParams { seed, ..*hp }, tag).map(Some)
    };
    let (s, l) = rayon::join(
        || fit(&small, small_seed, RegionTag::Small),
        || fit(&large, large_seed, RegionTag::Large),
    );
    RegionPair::new(s?, l?, REGION_BOUNDARY_DEG)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub method: Method,
    /// `null` for noiseless samples.
    pub snr_db: Option<f64>,
    pub truth: TargetTruth,
    pub est_aoa_deg: f64,
    pub est_toa_s: f64,
    /// `[x, y]` in meters
    pub est_position: [f64; 2],
    pub region_decided: Region,
    pub region_true: Region,
}

impl EstimateRecord {
    fn new(method: Method, sample: &CsiSample, aoa: f64, toa: f64, decided: Region, cfg: &SignalConfig) -> Self {
        let range = cfg.convention.range_from_toa(toa);
        Self {
            method,
            snr_db: sample.snr_db.is_finite().then_some(sample.snr_db),
            truth: sample.truth,
            est_aoa_deg: aoa,
            est_toa_s: toa,
            est_position: polar_to_xy(range, aoa),
            region_decided: decided,
            region_true: region_for_angle(sample.truth.aoa_deg, REGION_BOUNDARY_DEG),
        }
    }

    /// Estimated minus true angle, wrapped to (−180°, 180°].
    pub fn aoa_error_deg(&self) -> f64 {
        wrap_degrees(self.est_aoa_deg - self.truth.aoa_deg)
    }

    pub fn toa_error_s(&self) -> f64 {
        self.est_toa_s - self.truth.toa_s
    }

    /// Euclidean distance between estimated and true positions.
    pub fn position_error_m(&self) -> f64 {
        let t = self.truth.position();
        (self.est_position[0] - t[0]).hypot(self.est_position[1] - t[1])
    }
}

pub fn wrap_degrees(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Region-routed transformer estimate. A network that regresses `|aoa|`
/// takes its sign from the routing MUSIC angle.
pub fn predict(sample: &CsiSample, pair: &RegionPair, cfg: &SignalConfig) -> Result<EstimateRecord> {
    let (decided, music_aoa) = region_decide_with_angle(&sample.matrix, &cfg.array, pair.boundary_deg)?;
    let net = pair.network(decided);
    let (mut aoa, toa) = net.predict(&sample.matrix)?;
    if net.aoa_target == AoaTarget::Magnitude {
        aoa = aoa.abs().copysign(music_aoa);
    }
    Ok(EstimateRecord::new(Method::TransformerRegion, sample, aoa, toa, decided, cfg))
}

/// Estimate from one network trained on the full angle range.
pub fn predict_single(sample: &CsiSample, ckpt: &ModelCheckpoint, cfg: &SignalConfig) -> Result<EstimateRecord> {
    let (aoa, toa) = ckpt.predict(&sample.matrix)?;
    let decided = region_for_angle(aoa, REGION_BOUNDARY_DEG);
    Ok(EstimateRecord::new(Method::TransformerSingle, sample, aoa, toa, decided, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicOptions {
    /// Joint 2-D search instead of separate angle and delay searches.
    pub joint: bool,
    pub joint_config: JointMusicConfig,
    pub angle_step_deg: f64,
    /// Subband length for delay MUSIC; `None` means half the subcarriers.
    pub subband_length: Option<usize>,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self { joint: false, joint_config: JointMusicConfig::default(), angle_step_deg: 0.1, subband_length: None }
    }
}

const MUSIC_ANGLE_SPAN_DEG: f64 = 90.0;

fn music_estimate(csi: &CMatrix, cfg: &SignalConfig, opts: &MusicOptions) -> Result<(f64, f64)> {
    let agrid = angle_grid(-MUSIC_ANGLE_SPAN_DEG, MUSIC_ANGLE_SPAN_DEG, opts.angle_step_deg);
    let spacing = cfg.ofdm.subcarrier_spacing;
    if opts.joint {
        let dec = opts.joint_config.decimation.max(1);
        let kept = csi.rows().div_ceil(dec);
        let dgrid = delay_grid(1.0 / (dec as f64 * spacing), 100 * kept);
        let j = joint_music_2d(csi, 1, &agrid, &dgrid, &opts.joint_config, &cfg.array, spacing)?;
        return Ok((j.aoa_deg, centered_delay(j.toa_s, 1.0 / (dec as f64 * spacing))));
    }
    let aoa = music_angle_spectrum(&spatial_covariance(csi)?, 1, &agrid, &cfg.array)?.peak.parameter;
    let subband = opts.subband_length.unwrap_or((csi.rows() / 2).max(2));
    let dgrid = default_delay_grid(spacing, csi.rows());
    let toa = delay_music_spectrum(csi, 1, &dgrid, subband, spacing)?.peak.parameter;
    Ok((aoa, centered_delay(toa, 1.0 / spacing)))
}

/// The delay spectrum repeats with `period`; map an estimate to
/// `[-period/2, period/2)` so small true delays are not aliased to the top
/// of the search interval.
pub fn centered_delay(toa_s: f64, period: f64) -> f64 {
    let t = toa_s.rem_euclid(period);
    if t >= period / 2.0 {
        t - period
    } else {
        t
    }
}

/// Divides each antenna column by the profile's coefficient at `aoa_deg`,
/// clamped to the profile's angular coverage.
pub fn remove_impairment(csi: &CMatrix, aoa_deg: f64, profile: &ImpairmentProfile) -> Result<CMatrix> {
    let at = match profile {
        ImpairmentProfile::AngleDependent(t) => {
            aoa_deg.clamp(t.angles_deg[0], *t.angles_deg.last().expect("validated table is non-empty"))
        }
        _ => aoa_deg,
    };
    let Some(coeffs) = profile.coefficients_at(at)? else {
        return Ok(csi.clone());
    };
    Ok(CMatrix::from_fn(csi.rows(), csi.cols(), |r, c| csi[(r, c)] / coeffs[c]))
}

/// MUSIC angle and delay estimate; with `calibrated`, the search is repeated
/// on the CSI corrected by the configured impairment profile at the first
/// angle estimate.
pub fn music_baseline(
    sample: &CsiSample,
    cfg: &SignalConfig,
    opts: &MusicOptions,
    calibrated: bool,
) -> Result<EstimateRecord> {
    let (mut aoa, mut toa) = music_estimate(&sample.matrix, cfg, opts)?;
    let method = if calibrated {
        let corrected = remove_impairment(&sample.matrix, aoa, &cfg.impairment)?;
        (aoa, toa) = music_estimate(&corrected, cfg, opts)?;
        Method::MusicCalibrated
    } else {
        Method::Music
    };
    let decided = region_for_angle(aoa, REGION_BOUNDARY_DEG);
    Ok(EstimateRecord::new(method, sample, aoa, toa, decided, cfg))
}

pub fn write_records_jsonl<W: Write>(mut out: W, records: &[EstimateRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub const RECORD_CSV_HEADER: &str = "method,snr_db,true_aoa_deg,true_range_m,true_toa_ns,est_aoa_deg,est_toa_ns,\
est_x_m,est_y_m,region_decided,region_true,aoa_error_deg,toa_error_ns,position_error_m";

pub fn write_records_csv<W: Write>(mut out: W, records: &[EstimateRecord]) -> Result<()> {
    writeln!(out, "{RECORD_CSV_HEADER}")?;
    for r in records {
        let snr = r.snr_db.map_or_else(|| "inf".to_string(), |v| v.to_string());
        writeln!(
            out,
            "{},{snr},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.truth.aoa_deg,
            r.truth.range_m,
            r.truth.toa_s * 1e9,
            r.est_aoa_deg,
            r.est_toa_s * 1e9,
            r.est_position[0],
            r.est_position[1],
            r.region_decided,
            r.region_true,
            r.aoa_error_deg(),
            r.toa_error_s() * 1e9,
            r.position_error_m(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize_csi, RangeConvention};

    #[test]
    fn wrap_cases() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-3.5), -3.5);
        assert_eq!(wrap_degrees(720.25), 0.25);
    }

    #[test]
    fn centered_delay_cases() {
        assert_eq!(centered_delay(10e-9, 1e-6), 10e-9);
        assert!((centered_delay(0.999e-6, 1e-6) + 1e-9).abs() < 1e-18);
        assert_eq!(centered_delay(0.5e-6, 1e-6), -0.5e-6);
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("cnn".parse::<Method>().is_err());
    }

    #[test]
    fn music_labels_and_noiseless_accuracy() {
        let cfg = SignalConfig::unimpaired();
        let truth = TargetTruth::new(20.0, 5.0, RangeConvention::OneWay);
        let s = synthesize_csi(&truth, f64::INFINITY, &cfg, 0).unwrap();
        let r = music_baseline(&s, &cfg, &MusicOptions::default(), false).unwrap();
        assert_eq!(r.method, Method::Music);
        assert_eq!(r.snr_db, None);
        assert!(r.aoa_error_deg().abs() <= 0.1);
        let step = 1.0 / (cfg.ofdm.subcarrier_spacing * 100.0 * cfg.ofdm.num_subcarriers as f64);
        assert!(r.toa_error_s().abs() <= step);
        let c = music_baseline(&s, &cfg, &MusicOptions::default(), true).unwrap();
        assert_eq!(c.method, Method::MusicCalibrated);
        assert_eq!((c.est_aoa_deg, c.est_toa_s), (r.est_aoa_deg, r.est_toa_s));
    }
}
