//! MUSIC pseudospectra over angle, delay, and the joint (angle, delay) grid.
//!
//! Spectra are evaluated as `1 / (aᴴ Pₙ a)` with `Pₙ = I − Uₛ Uₛᴴ` the
//! projector onto the noise subspace. The projected energy is floored at
//! `NULL_FLOOR · ‖a‖²` so that exact nulls of noiseless data stay finite.

use std::io::Write;

use num_complex::Complex64;

use super::{hermitian_eig, CovarianceMatrix, EigenDecomposition};
use crate::error::{config_err, Error, Result};
use crate::linalg::{cdot, CMatrix};
use crate::signal::{antenna_vector, subcarrier_vector, ArrayConfig};

const NULL_FLOOR: f64 = 1e-14;
/// Upper bound on `K · num_antennas` for the joint search.
pub const JOINT_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Refined parameter value (degrees or seconds).
    pub parameter: f64,
    /// Grid index of the raw maximum.
    pub index: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pseudospectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub peak: Peak,
}

impl Pseudospectrum {
    fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Self {
        let peak = refine_peak(&grid, &values);
        Self { grid, values, peak }
    }

    /// Two-column `(parameter, value)` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W, parameter_label: &str) -> Result<()> {
        writeln!(out, "{parameter_label},pseudospectrum")?;
        for (g, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{g},{v}")?;
        }
        Ok(())
    }
}

/// Evenly spaced angles from `lo` to `hi` inclusive. When `1/step` is an
/// integer the points are computed as exact decimal quotients.
pub fn angle_grid(lo_deg: f64, hi_deg: f64, step_deg: f64) -> Vec<f64> {
    let count = ((hi_deg - lo_deg) / step_deg).round() as usize + 1;
    let inv = (1.0 / step_deg).round();
    if ((1.0 / step_deg) - inv).abs() < 1e-9 && (lo_deg * inv - (lo_deg * inv).round()).abs() < 1e-9 {
        let base = (lo_deg * inv).round();
        (0..count).map(|i| (base + i as f64) / inv).collect()
    } else {
        (0..count).map(|i| lo_deg + i as f64 * step_deg).collect()
    }
}

/// `points` delays evenly covering `[0, period)`.
pub fn delay_grid(period_s: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 * period_s / points as f64).collect()
}

/// `[0, 1/Δf)` at steps of `1/(100 · Δf · K)` for `K` tones spaced `Δf`.
pub fn default_delay_grid(tone_spacing: f64, num_tones: usize) -> Vec<f64> {
    delay_grid(1.0 / tone_spacing, 100 * num_tones)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(config_err("search grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(config_err("search grid must be strictly increasing"));
    }
    Ok(())
}

fn signal_subspace(eig: &EigenDecomposition, num_sources: usize) -> Vec<Vec<Complex64>> {
    (0..num_sources).map(|k| eig.vector(k)).collect()
}

/// `aᴴ Pₙ a`, floored.
fn noise_energy(a: &[Complex64], signal: &[Vec<Complex64>]) -> f64 {
    let total: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let captured: f64 = signal.iter().map(|u| cdot(u, a).norm_sqr()).sum();
    (total - captured).max(NULL_FLOOR * total)
}

/// Global argmax, then a parabola through the projected energy (the
/// reciprocal of the spectrum) at the three points around it.
fn refine_peak(grid: &[f64], values: &[f64]) -> Peak {
    let (index, &height) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| if *cur.1 > *best.1 { cur } else { best });
    let mut parameter = grid[index];
    if index > 0 && index + 1 < grid.len() {
        let (dm, d0, dp) = (1.0 / values[index - 1], 1.0 / height, 1.0 / values[index + 1]);
        let curvature = dm - 2.0 * d0 + dp;
        if curvature > 0.0 && curvature.is_finite() {
            let offset = (0.5 * (dm - dp) / curvature).clamp(-0.5, 0.5);
            let step = if offset >= 0.0 { grid[index + 1] - grid[index] } else { grid[index] - grid[index - 1] };
            parameter += offset * step;
        }
    }
    Peak { parameter, index, height }
}

fn check_sources(num_sources: usize, dim: usize) -> Result<()> {
    if num_sources == 0 || num_sources >= dim {
        return Err(config_err(format!("num_sources must be in 1..{dim}, got {num_sources}")));
    }
    Ok(())
}

/// Angle-only MUSIC on an antenna-domain covariance.
pub fn music_angle_spectrum(
    cov: &CovarianceMatrix,
    num_sources: usize,
    grid: &[f64],
    array: &ArrayConfig,
) -> Result<Pseudospectrum> {
    check_grid(grid)?;
    let n = cov.dimension();
    check_sources(num_sources, n)?;
    let eig = hermitian_eig(&cov.entries)?;
    let signal = signal_subspace(&eig, num_sources);
    let values = grid
        .iter()
        .map(|&theta| 1.0 / noise_energy(&antenna_vector(theta, array, n), &signal))
        .collect();
    Ok(Pseudospectrum::from_values(grid.to_vec(), values))
}

/// Forward-averaged subband covariance: every length-`window` run of
/// consecutive rows, in every column, is one snapshot.
fn subband_covariance(csi: &CMatrix, window: usize) -> CovarianceMatrix {
    let (m, n) = csi.shape();
    let mut r = CMatrix::zeros(window, window);
    let mut count = 0;
    let mut x = vec![Complex64::new(0.0, 0.0); window];
    for col in 0..n {
        for start in 0..=m - window {
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = csi[(start + k, col)];
            }
            accumulate_outer(&mut r, &x);
            count += 1;
        }
    }
    finish_covariance(r, count)
}

fn accumulate_outer(r: &mut CMatrix, x: &[Complex64]) {
    let d = x.len();
    for i in 0..d {
        for j in i..d {
            r[(i, j)] += x[i] * x[j].conj();
        }
    }
}

fn finish_covariance(mut r: CMatrix, count: usize) -> CovarianceMatrix {
    let d = r.rows();
    let scale = 1.0 / count as f64;
    for i in 0..d {
        r[(i, i)] = Complex64::new(r[(i, i)].re * scale, 0.0);
        for j in i + 1..d {
            let v = r[(i, j)] * scale;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
    CovarianceMatrix { entries: r, snapshot_count: count }
}

/// Delay-only MUSIC with subband smoothing along the subcarrier axis.
pub fn delay_music_spectrum(
    csi: &CMatrix,
    num_sources: usize,
    grid: &[f64],
    subband_length: usize,
    subcarrier_spacing: f64,
) -> Result<Pseudospectrum> {
    check_grid(grid)?;
    if subband_length < 2 || subband_length > csi.rows() {
        return Err(config_err(format!(
            "subband_length must be in 2..={}, got {subband_length}",
            csi.rows()
        )));
    }
    check_sources(num_sources, subband_length)?;
    let cov = subband_covariance(csi, subband_length);
    let eig = hermitian_eig(&cov.entries)?;
    let signal = signal_subspace(&eig, num_sources);
    let values = grid
        .iter()
        .map(|&tau| 1.0 / noise_energy(&subcarrier_vector(tau, subcarrier_spacing, subband_length), &signal))
        .collect();
    Ok(Pseudospectrum::from_values(grid.to_vec(), values))
}

/// Parameters of the reduced-dimension joint search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMusicConfig {
    /// Keep every `decimation`-th subcarrier.
    pub decimation: usize,
    pub antenna_window: usize,
    /// Defaults to `K − 3` for `K` retained subcarriers.
    pub subcarrier_window: Option<usize>,
}

impl Default for JointMusicConfig {
    fn default() -> Self {
        Self { decimation: 8, antenna_window: 3, subcarrier_window: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectrum {
    pub angle_grid: Vec<f64>,
    pub delay_grid: Vec<f64>,
    /// Row-major, angle index outermost.
    pub values: Vec<f64>,
    pub aoa_deg: f64,
    pub toa_s: f64,
}

impl JointSpectrum {
    pub fn value(&self, angle_idx: usize, delay_idx: usize) -> f64 {
        self.values[angle_idx * self.delay_grid.len() + delay_idx]
    }
}

/// 2-D MUSIC over the Kronecker steering vector of a decimated CSI matrix,
/// with forward smoothing over antenna × subcarrier sub-windows.
///
/// `delay_grid` should cover `[0, 1/(decimation · Δf))`; the decimated
/// spectrum is periodic with that period.
pub fn joint_music_2d(
    csi: &CMatrix,
    num_sources: usize,
    angle_grid: &[f64],
    delay_grid: &[f64],
    cfg: &JointMusicConfig,
    array: &ArrayConfig,
    subcarrier_spacing: f64,
) -> Result<JointSpectrum> {
    check_grid(angle_grid)?;
    check_grid(delay_grid)?;
    if cfg.decimation == 0 {
        return Err(config_err("decimation must be >= 1"));
    }
    let (m, n) = csi.shape();
    let k = m.div_ceil(cfg.decimation);
    if k * n > JOINT_MAX_DIM {
        return Err(config_err(format!(
            "joint search dimension {k}x{n} exceeds {JOINT_MAX_DIM}; increase decimation"
        )));
    }
    let wa = cfg.antenna_window;
    let ws = cfg.subcarrier_window.unwrap_or(k.saturating_sub(3));
    if wa < 1 || wa > n || ws < 1 || ws > k {
        return Err(config_err(format!(
            "smoothing window {wa}x{ws} does not fit the {n}x{k} decimated array"
        )));
    }
    let dim = wa * ws;
    let snapshots = (n - wa + 1) * (k - ws + 1);
    if snapshots <= num_sources || dim <= num_sources {
        return Err(Error::Numeric(format!(
            "smoothed covariance is rank-deficient: {snapshots} snapshots of dimension {dim} \
             cannot separate {num_sources} source(s)"
        )));
    }
    check_sources(num_sources, dim)?;

    let rows: Vec<usize> = (0..k).map(|i| i * cfg.decimation).collect();
    let mut r = CMatrix::zeros(dim, dim);
    let mut x = vec![Complex64::new(0.0, 0.0); dim];
    for a0 in 0..=n - wa {
        for s0 in 0..=k - ws {
            for ma in 0..wa {
                for ns in 0..ws {
                    x[ma * ws + ns] = csi[(rows[s0 + ns], a0 + ma)];
                }
            }
            accumulate_outer(&mut r, &x);
        }
    }
    let cov = finish_covariance(r, snapshots);
    let eig = hermitian_eig(&cov.entries)?;
    let signal = signal_subspace(&eig, num_sources);
    let effective_spacing = subcarrier_spacing * cfg.decimation as f64;

    let subs: Vec<Vec<Complex64>> =
        delay_grid.iter().map(|&tau| subcarrier_vector(tau, effective_spacing, ws)).collect();
    let total = (wa * ws) as f64;
    let mut values = Vec::with_capacity(angle_grid.len() * delay_grid.len());
    for &theta in angle_grid {
        let ant = antenna_vector(theta, array, wa);
        // uᴴ(a ⊗ b) = Σₙ bₙ · Σₘ conj(u[m·ws + n]) aₘ
        let partial: Vec<Vec<Complex64>> = signal
            .iter()
            .map(|u| (0..ws).map(|ns| (0..wa).map(|ma| u[ma * ws + ns].conj() * ant[ma]).sum()).collect())
            .collect();
        for b in &subs {
            let captured: f64 = partial
                .iter()
                .map(|w| w.iter().zip(b).map(|(wi, bi)| wi * bi).sum::<Complex64>().norm_sqr())
                .sum();
            values.push(1.0 / (total - captured).max(NULL_FLOOR * total));
        }
    }

    let nd = delay_grid.len();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let (ai, di) = (best / nd, best % nd);
    let angle_line: Vec<f64> = (0..angle_grid.len()).map(|i| values[i * nd + di]).collect();
    let delay_line = &values[ai * nd..(ai + 1) * nd];
    let aoa_deg = refine_peak(angle_grid, &angle_line).parameter;
    let toa_s = refine_peak(delay_grid, delay_line).parameter;
    Ok(JointSpectrum { angle_grid: angle_grid.to_vec(), delay_grid: delay_grid.to_vec(), values, aoa_deg, toa_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{
        steering_matrix, synthesize_csi, OfdmConfig, RangeConvention, SignalConfig, TargetTruth,
    };
    use crate::subspace::spatial_covariance;

    fn desk() -> (ArrayConfig, OfdmConfig) {
        (ArrayConfig::default(), OfdmConfig::default())
    }

    /// Independent evaluation: explicit noise eigenvectors, `Σ |eₖᴴ a|²`.
    fn brute_force(r: &CMatrix, num_sources: usize, steer: impl Fn(f64) -> Vec<Complex64>, grid: &[f64]) -> Vec<f64> {
        let eig = hermitian_eig(r).unwrap();
        let noise: Vec<Vec<Complex64>> = (num_sources..r.rows()).map(|k| eig.vector(k)).collect();
        grid.iter()
            .map(|&p| {
                let a = steer(p);
                1.0 / noise.iter().map(|e| cdot(e, &a).norm_sqr()).sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn grids() {
        let g = angle_grid(-60.0, 60.0, 0.1);
        assert_eq!(g.len(), 1201);
        assert_eq!(g[0], -60.0);
        assert_eq!(g[800], 20.0);
        assert_eq!(g[1200], 60.0);
        let d = default_delay_grid(30e3, 64);
        assert_eq!(d.len(), 6400);
        assert!((d[1] - 1.0 / (100.0 * 30e3 * 64.0)).abs() < 1e-20);
        assert!(*d.last().unwrap() < 1.0 / 30e3);
    }

    #[test]
    fn angle_peak_noiseless() {
        let (array, ofdm) = desk();
        let y = steering_matrix(20.0, 12e-9, &array, &ofdm);
        let cov = spatial_covariance(&y).unwrap();
        let grid = angle_grid(-60.0, 60.0, 0.1);
        let spec = music_angle_spectrum(&cov, 1, &grid, &array).unwrap();
        assert!((spec.peak.parameter - 20.0).abs() <= 0.1);
        assert_eq!(spec.grid[spec.peak.index], 20.0);
        assert!(spec.values.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn angle_spectrum_symmetric_at_boresight() {
        let (array, ofdm) = desk();
        let y = steering_matrix(0.0, 0.0, &array, &ofdm);
        let cov = spatial_covariance(&y).unwrap();
        let grid = angle_grid(-60.0, 60.0, 0.1);
        let spec = music_angle_spectrum(&cov, 1, &grid, &array).unwrap();
        let n = grid.len();
        for i in 0..n {
            let (a, b) = (spec.values[i], spec.values[n - 1 - i]);
            if i == n / 2 {
                continue;
            }
            assert!((a - b).abs() <= 1e-9 * a.max(b), "{} vs {}", a, b);
        }
    }

    #[test]
    fn angle_errors() {
        let (array, ofdm) = desk();
        let cov = spatial_covariance(&steering_matrix(0.0, 0.0, &array, &ofdm)).unwrap();
        assert!(music_angle_spectrum(&cov, 1, &[], &array).is_err());
        assert!(music_angle_spectrum(&cov, 4, &[0.0], &array).is_err());
        assert!(music_angle_spectrum(&cov, 1, &[1.0, 0.0], &array).is_err());
    }

    #[test]
    fn angle_rmse_at_20db() {
        let cfg = SignalConfig::default();
        let grid = angle_grid(-60.0, 60.0, 0.1);
        let truth = TargetTruth::new(20.0, 6.0, RangeConvention::OneWay);
        let mut sq = 0.0;
        for seed in 0..500 {
            let s = synthesize_csi(&truth, 20.0, &cfg, seed).unwrap();
            let cov = spatial_covariance(&s.matrix).unwrap();
            let spec = music_angle_spectrum(&cov, 1, &grid, &cfg.array).unwrap();
            sq += (spec.peak.parameter - 20.0).powi(2);
        }
        let rmse = (sq / 500.0).sqrt();
        assert!(rmse < 1.0, "rmse {rmse}");
    }

    #[test]
    fn scaling_invariance_of_argmax() {
        let cfg = SignalConfig::default();
        let truth = TargetTruth::new(-33.0, 6.0, RangeConvention::OneWay);
        let s = synthesize_csi(&truth, 5.0, &cfg, 4).unwrap();
        let grid = angle_grid(-60.0, 60.0, 0.1);
        let base = music_angle_spectrum(&spatial_covariance(&s.matrix).unwrap(), 1, &grid, &cfg.array).unwrap();
        let scaled = s.matrix.scale(Complex64::from_polar(17.0, 1.1));
        let other = music_angle_spectrum(&spatial_covariance(&scaled).unwrap(), 1, &grid, &cfg.array).unwrap();
        assert_eq!(base.peak.index, other.peak.index);
    }

    #[test]
    fn delay_peak_noiseless() {
        let (array, ofdm) = desk();
        let grid = default_delay_grid(ofdm.subcarrier_spacing, ofdm.num_subcarriers);
        let step = grid[1];
        for toa in [0.0, 20e-9] {
            let y = steering_matrix(10.0, toa, &array, &ofdm);
            let spec = delay_music_spectrum(&y, 1, &grid, 32, ofdm.subcarrier_spacing).unwrap();
            assert!((spec.peak.parameter - toa).abs() <= step, "toa {toa}: {}", spec.peak.parameter);
        }
        let y = steering_matrix(10.0, 0.0, &array, &ofdm);
        let spec = delay_music_spectrum(&y, 1, &grid, 32, ofdm.subcarrier_spacing).unwrap();
        assert_eq!(spec.peak.index, 0);
    }

    #[test]
    fn delay_is_periodic_in_tone_spacing() {
        let (array, ofdm) = desk();
        let grid = default_delay_grid(ofdm.subcarrier_spacing, 16);
        let toa = 20e-9;
        let a = steering_matrix(10.0, toa, &array, &ofdm);
        let b = steering_matrix(10.0, toa + 1.0 / ofdm.subcarrier_spacing, &array, &ofdm);
        let sa = delay_music_spectrum(&a, 1, &grid, 32, ofdm.subcarrier_spacing).unwrap();
        let sb = delay_music_spectrum(&b, 1, &grid, 32, ofdm.subcarrier_spacing).unwrap();
        assert_eq!(sa.peak.index, sb.peak.index);
        for (x, y) in sa.values.iter().zip(&sb.values) {
            assert!((x - y).abs() <= 1e-6 * x.max(*y));
        }
    }

    #[test]
    fn delay_errors() {
        let (array, ofdm) = desk();
        let y = steering_matrix(0.0, 0.0, &array, &ofdm);
        assert!(delay_music_spectrum(&y, 1, &[0.0], 65, 30e3).is_err());
        assert!(delay_music_spectrum(&y, 1, &[0.0], 1, 30e3).is_err());
        assert!(delay_music_spectrum(&y, 4, &[0.0], 4, 30e3).is_err());
    }

    #[test]
    fn joint_peak_noiseless() {
        let (array, ofdm) = desk();
        let y = steering_matrix(30.0, 15e-9, &array, &ofdm);
        let cfg = JointMusicConfig { decimation: 8, antenna_window: 3, subcarrier_window: Some(5) };
        let eff = ofdm.subcarrier_spacing * 8.0;
        let agrid = angle_grid(-60.0, 60.0, 0.1);
        let dgrid = default_delay_grid(eff, 8);
        let spec = joint_music_2d(&y, 1, &agrid, &dgrid, &cfg, &array, ofdm.subcarrier_spacing).unwrap();
        assert!((spec.aoa_deg - 30.0).abs() <= 0.1, "{}", spec.aoa_deg);
        assert!((spec.toa_s - 15e-9).abs() <= dgrid[1], "{}", spec.toa_s);
        assert!(*dgrid.last().unwrap() < 1.0 / eff);
    }

    #[test]
    fn joint_errors() {
        let (array, ofdm) = desk();
        let y = steering_matrix(30.0, 15e-9, &array, &ofdm);
        let agrid = angle_grid(-10.0, 10.0, 1.0);
        let dgrid = delay_grid(1e-6, 10);
        let too_big = JointMusicConfig { decimation: 2, ..JointMusicConfig::default() };
        assert!(matches!(joint_music_2d(&y, 1, &agrid, &dgrid, &too_big, &array, 30e3), Err(Error::Config(_))));
        let one_snapshot = JointMusicConfig { decimation: 8, antenna_window: 4, subcarrier_window: Some(8) };
        assert!(matches!(joint_music_2d(&y, 1, &agrid, &dgrid, &one_snapshot, &array, 30e3), Err(Error::Numeric(_))));
    }

    #[test]
    fn delay_matches_brute_force_on_small_instance() {
        let mut cfg = SignalConfig::default();
        cfg.ofdm.num_subcarriers = 8;
        let truth = TargetTruth::new(12.0, 7.0, RangeConvention::OneWay);
        let s = synthesize_csi(&truth, 10.0, &cfg, 5).unwrap();
        let grid = delay_grid(1.0 / 30e3, 400);
        let spec = delay_music_spectrum(&s.matrix, 1, &grid, 4, 30e3).unwrap();
        let r = subband_covariance(&s.matrix, 4);
        let oracle = brute_force(&r.entries, 1, |t| subcarrier_vector(t, 30e3, 4), &grid);
        for (a, b) in spec.values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn joint_matches_brute_force_on_small_instance() {
        let mut cfg = SignalConfig::default();
        cfg.ofdm.num_subcarriers = 8;
        let truth = TargetTruth::new(-25.0, 5.0, RangeConvention::OneWay);
        let s = synthesize_csi(&truth, 10.0, &cfg, 8).unwrap();
        let jcfg = JointMusicConfig { decimation: 1, antenna_window: 3, subcarrier_window: Some(5) };
        let agrid = angle_grid(-60.0, 60.0, 2.0);
        let dgrid = delay_grid(1.0 / 30e3, 50);
        let spec = joint_music_2d(&s.matrix, 1, &agrid, &dgrid, &jcfg, &cfg.array, 30e3).unwrap();

        // explicit smoothed covariance and Kronecker steering vectors
        let mut r = CMatrix::zeros(15, 15);
        let mut count = 0.0;
        for a0 in 0..2 {
            for s0 in 0..4 {
                let x: Vec<Complex64> =
                    (0..15).map(|i| s.matrix[(s0 + i % 5, a0 + i / 5)]).collect();
                for i in 0..15 {
                    for j in 0..15 {
                        r[(i, j)] += x[i] * x[j].conj();
                    }
                }
                count += 1.0;
            }
        }
        let r = r.scale(Complex64::new(1.0 / count, 0.0));
        for (ai, &theta) in agrid.iter().enumerate() {
            let ant = antenna_vector(theta, &cfg.array, 3);
            let oracle = brute_force(
                &r,
                1,
                |t| {
                    let sub = subcarrier_vector(t, 30e3, 5);
                    ant.iter().flat_map(|a| sub.iter().map(move |b| a * b)).collect()
                },
                &dgrid,
            );
            for (di, b) in oracle.iter().enumerate() {
                let a = spec.value(ai, di);
                assert!((a - b).abs() <= 1e-8 * b, "({theta}, {di}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn spectrum_csv() {
        let (array, ofdm) = desk();
        let cov = spatial_covariance(&steering_matrix(5.0, 0.0, &array, &ofdm)).unwrap();
        let spec = music_angle_spectrum(&cov, 1, &angle_grid(-2.0, 2.0, 1.0), &array).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf, "aoa_deg").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("aoa_deg,pseudospectrum\n-2,"));
    }
}
