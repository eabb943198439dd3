use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{apply_impairment, steering_matrix, ImpairmentMode, SignalConfig, TargetTruth};
use crate::error::{config_err, Result};
use crate::linalg::CMatrix;

/// One single-snapshot CSI observation with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSample {
    /// `num_subcarriers × num_antennas`
    pub matrix: CMatrix,
    pub truth: TargetTruth,
    /// `f64::INFINITY` marks a noiseless sample.
    pub snr_db: f64,
    pub seed: u64,
    pub impairment_mode: ImpairmentMode,
}

/// Random stream used for the CSI itself; stream 0 of the same seed is left
/// for label draws in dataset generation.
pub(crate) const CSI_STREAM: u64 = 1;

/// `Γ(aoa) ⊙ [pilot·A(aoa, toa) + Σ NLOS] + noise`, with the noise variance set
/// so that per-entry LOS power over noise power equals `snr_db`.
pub fn synthesize_csi(truth: &TargetTruth, snr_db: f64, cfg: &SignalConfig, seed: u64) -> Result<CsiSample> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(config_err(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    if !(truth.range_m > 0.0 && truth.aoa_deg.is_finite() && truth.toa_s.is_finite()) {
        return Err(config_err(format!("invalid target {truth:?}")));
    }
    let array = &cfg.array;
    let ofdm = &cfg.ofdm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CSI_STREAM);

    let los = steering_matrix(truth.aoa_deg, truth.toa_s, array, ofdm);
    let mut signal = los.scale(ofdm.pilot);

    let mp = &cfg.multipath;
    let nlos_amp = 10f64.powf(mp.nlos_power_db / 20.0);
    for _ in 0..mp.active_paths() {
        let angle = truth.aoa_deg + rng.gen_range(-1.0..=1.0) * mp.nlos_angle_spread;
        let delay = truth.toa_s + rng.gen::<f64>() * mp.nlos_excess_delay_max;
        let gain = Complex64::from_polar(nlos_amp, rng.gen_range(0.0..std::f64::consts::TAU)) * ofdm.pilot;
        let path = steering_matrix(angle, delay, array, ofdm);
        for (s, p) in signal.as_mut_slice().iter_mut().zip(path.as_slice()) {
            *s += gain * p;
        }
    }

    let mut matrix = apply_impairment(&signal, truth.aoa_deg, &cfg.impairment)?;

    if snr_db.is_finite() {
        let signal_power = ofdm.pilot.norm_sqr();
        let sigma = (signal_power * 10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        for v in matrix.as_mut_slice() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }

    Ok(CsiSample { matrix, truth: *truth, snr_db, seed, impairment_mode: cfg.impairment.mode() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ImpairmentProfile, MultipathConfig, RangeConvention};

    #[test]
    fn noiseless_los_equals_steering() {
        let cfg = SignalConfig::default();
        let truth = TargetTruth::new(22.5, 7.0, RangeConvention::OneWay);
        let s = synthesize_csi(&truth, f64::INFINITY, &cfg, 9).unwrap();
        assert_eq!(s.matrix, steering_matrix(22.5, truth.toa_s, &cfg.array, &cfg.ofdm));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut cfg = SignalConfig::impaired();
        cfg.multipath = MultipathConfig { los_only: false, ..MultipathConfig::default() };
        let truth = TargetTruth::new(-51.0, 4.0, RangeConvention::OneWay);
        let a = synthesize_csi(&truth, 3.0, &cfg, 77).unwrap();
        let b = synthesize_csi(&truth, 3.0, &cfg, 77).unwrap();
        let c = synthesize_csi(&truth, 3.0, &cfg, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.matrix, c.matrix);
        assert!(a.matrix.is_finite());
    }

    #[test]
    fn rejects_bad_snr() {
        let cfg = SignalConfig::default();
        let truth = TargetTruth::new(0.0, 5.0, RangeConvention::OneWay);
        assert!(synthesize_csi(&truth, f64::NAN, &cfg, 0).is_err());
        assert!(synthesize_csi(&truth, f64::NEG_INFINITY, &cfg, 0).is_err());
    }

    #[test]
    fn empirical_snr_matches_request() {
        let cfg = SignalConfig::default();
        let truth = TargetTruth::new(10.0, 5.0, RangeConvention::OneWay);
        let clean = steering_matrix(10.0, truth.toa_s, &cfg.array, &cfg.ofdm);
        let (mut sig, mut noise) = (0.0, 0.0);
        for seed in 0..1000 {
            let s = synthesize_csi(&truth, 0.0, &cfg, seed).unwrap();
            for (y, x) in s.matrix.as_slice().iter().zip(clean.as_slice()) {
                sig += x.norm_sqr();
                noise += (y - x).norm_sqr();
            }
        }
        let snr = 10.0 * (sig / noise).log10();
        assert!(snr.abs() < 0.2, "empirical snr {snr}");
    }

    #[test]
    fn impairment_mode_is_tagged() {
        let cfg = SignalConfig { impairment: ImpairmentProfile::default_angle_dependent(4), ..SignalConfig::default() };
        let truth = TargetTruth::new(10.0, 5.0, RangeConvention::RoundTrip);
        let s = synthesize_csi(&truth, 10.0, &cfg, 1).unwrap();
        assert_eq!(s.impairment_mode, ImpairmentMode::AngleDependent);
        assert!((s.truth.toa_s - 2.0 * 5.0 / crate::signal::SPEED_OF_LIGHT).abs() < 1e-20);
    }
}
