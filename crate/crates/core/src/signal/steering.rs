use std::f64::consts::PI;

use num_complex::Complex64;

use super::{ArrayConfig, OfdmConfig};
use crate::error::{shape_err, Error, Result};
use crate::linalg::{CMatrix, Matrix};

fn unit(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Phase of antenna `m` (1-based) relative to the first element.
pub fn antenna_phase(m: usize, aoa_deg: f64, cfg: &ArrayConfig) -> Result<Complex64> {
    if m < 1 || m > cfg.num_antennas {
        return Err(Error::Index { index: m, max: cfg.num_antennas });
    }
    Ok(antenna_phase_unchecked(m - 1, aoa_deg, cfg.element_spacing / cfg.wavelength()))
}

fn antenna_phase_unchecked(k: usize, aoa_deg: f64, spacing_wl: f64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    unit(-2.0 * PI * spacing_wl * k as f64 * aoa_deg.to_radians().sin())
}

/// Phase of subcarrier `n` (1-based) relative to the first subcarrier.
pub fn subcarrier_phase(n: usize, toa_s: f64, cfg: &OfdmConfig) -> Result<Complex64> {
    if n < 1 || n > cfg.num_subcarriers {
        return Err(Error::Index { index: n, max: cfg.num_subcarriers });
    }
    Ok(subcarrier_phase_unchecked(n - 1, toa_s, cfg.subcarrier_spacing))
}

fn subcarrier_phase_unchecked(k: usize, toa_s: f64, spacing: f64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    unit(-2.0 * PI * k as f64 * spacing * toa_s)
}

/// Antenna manifold `[Φ¹ … Φᴺ]` for an array of `len` elements.
pub fn antenna_vector(aoa_deg: f64, cfg: &ArrayConfig, len: usize) -> Vec<Complex64> {
    let spacing_wl = cfg.element_spacing / cfg.wavelength();
    (0..len).map(|k| antenna_phase_unchecked(k, aoa_deg, spacing_wl)).collect()
}

/// Subcarrier manifold `[Ψ¹ … Ψᴸ]` with tone spacing `spacing` hertz.
pub fn subcarrier_vector(toa_s: f64, spacing: f64, len: usize) -> Vec<Complex64> {
    (0..len).map(|k| subcarrier_phase_unchecked(k, toa_s, spacing)).collect()
}

/// Rank-1 response: entry `(n, m)` is `Ψⁿ(toa) · Φᵐ(aoa)`.
pub fn steering_matrix(aoa_deg: f64, toa_s: f64, array: &ArrayConfig, ofdm: &OfdmConfig) -> CMatrix {
    let phi = antenna_vector(aoa_deg, array, array.num_antennas);
    let psi = subcarrier_vector(toa_s, ofdm.subcarrier_spacing, ofdm.num_subcarriers);
    CMatrix::from_fn(ofdm.num_subcarriers, array.num_antennas, |n, m| psi[n] * phi[m])
}

/// Column-major vectorisation of [`steering_matrix`]: the subcarrier index
/// varies fastest, the antenna index slowest.
pub fn steering_vector(
    aoa_deg: f64,
    toa_s: f64,
    array: &ArrayConfig,
    ofdm: &OfdmConfig,
) -> Vec<Complex64> {
    let m = steering_matrix(aoa_deg, toa_s, array, ofdm);
    (0..m.cols()).flat_map(|c| m.col(c)).collect()
}

/// Inverse of [`steering_vector`]'s vectorisation.
pub fn unvectorize(v: &[Complex64], rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(shape_err(format!("vector of {} cannot form {rows}x{cols}", v.len())));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| v[c * rows + r]))
}

/// Real and imaginary planes of a complex matrix.
pub fn split_real_imag(m: &CMatrix) -> (Matrix, Matrix) {
    (
        Matrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].re),
        Matrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].im),
    )
}
