//! Array/OFDM configuration, steering model, impairments and CSI synthesis.
//!
//! CSI matrices are laid out with subcarriers along rows and antennas along
//! columns, so a sample is `num_subcarriers × num_antennas`.

mod dataset;
mod impairment;
mod steering;
mod synth;

pub use dataset::{
    configs_hash, generate_dataset, read_dataset, write_binary, write_jsonl, DatasetFile,
    GenerationRanges, BINARY_MAGIC, SCHEMA_VERSION,
};
pub use impairment::{apply_impairment, AngleTable, ImpairmentMode, ImpairmentProfile};
pub use steering::{
    antenna_phase, antenna_vector, split_real_imag, steering_matrix, steering_vector,
    subcarrier_phase, subcarrier_vector, unvectorize,
};
pub use synth::{synthesize_csi, CsiSample};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub num_antennas: usize,
    /// Meters.
    pub element_spacing: f64,
    /// Hertz.
    pub carrier_frequency: f64,
}

impl ArrayConfig {
    /// Half-wavelength array at `carrier_frequency`.
    pub fn half_wavelength(num_antennas: usize, carrier_frequency: f64) -> Self {
        Self {
            num_antennas,
            element_spacing: SPEED_OF_LIGHT / carrier_frequency / 2.0,
            carrier_frequency,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas < 2 {
            return Err(config_err(format!("num_antennas must be >= 2, got {}", self.num_antennas)));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(config_err("element_spacing must be positive"));
        }
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(config_err("carrier_frequency must be positive"));
        }
        Ok(())
    }
}

impl Default for ArrayConfig {
    /// Four elements at 2.565 GHz.
    fn default() -> Self {
        Self::half_wavelength(4, 2.565e9)
    }
}

/// OFDM numerology and the known pilot symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    pub num_subcarriers: usize,
    /// Hertz.
    pub subcarrier_spacing: f64,
    pub pilot: Complex64,
}

impl OfdmConfig {
    pub fn new(num_subcarriers: usize, subcarrier_spacing: f64) -> Self {
        Self { num_subcarriers, subcarrier_spacing, pilot: Complex64::new(1.0, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers < 2 {
            return Err(config_err(format!(
                "num_subcarriers must be >= 2, got {}",
                self.num_subcarriers
            )));
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return Err(config_err("subcarrier_spacing must be positive"));
        }
        if (self.pilot.norm() - 1.0).abs() > 1e-12 {
            return Err(config_err(format!("pilot must be unit modulus, |pilot| = {}", self.pilot.norm())));
        }
        Ok(())
    }
}

impl Default for OfdmConfig {
    /// Desk-scale 64 subcarriers at 30 kHz.
    fn default() -> Self {
        Self::new(64, 30e3)
    }
}

/// How propagation delay maps to range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeConvention {
    /// `toa = range / c`
    #[default]
    OneWay,
    /// `toa = 2 · range / c`
    RoundTrip,
}

impl RangeConvention {
    pub fn toa_from_range(self, range: f64) -> f64 {
        match self {
            RangeConvention::OneWay => range / SPEED_OF_LIGHT,
            RangeConvention::RoundTrip => 2.0 * range / SPEED_OF_LIGHT,
        }
    }

    pub fn range_from_toa(self, toa: f64) -> f64 {
        match self {
            RangeConvention::OneWay => toa * SPEED_OF_LIGHT,
            RangeConvention::RoundTrip => toa * SPEED_OF_LIGHT / 2.0,
        }
    }
}

/// Simplified LOS + NLOS propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathConfig {
    pub los_only: bool,
    pub num_nlos_paths: usize,
    /// Power of each NLOS path relative to LOS, dB.
    pub nlos_power_db: f64,
    /// NLOS angles are uniform within ± this many degrees of the LOS angle.
    pub nlos_angle_spread: f64,
    /// Seconds.
    pub nlos_excess_delay_max: f64,
}

impl MultipathConfig {
    pub fn los_only() -> Self {
        Self { los_only: true, ..Self::default() }
    }

    pub fn active_paths(&self) -> usize {
        if self.los_only {
            0
        } else {
            self.num_nlos_paths
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nlos_power_db <= 0.0) {
            return Err(config_err("nlos_power_db must be <= 0"));
        }
        if !(self.nlos_excess_delay_max >= 0.0 && self.nlos_excess_delay_max.is_finite()) {
            return Err(config_err("nlos_excess_delay_max must be >= 0"));
        }
        if !(self.nlos_angle_spread >= 0.0 && self.nlos_angle_spread.is_finite()) {
            return Err(config_err("nlos_angle_spread must be >= 0"));
        }
        Ok(())
    }
}

impl Default for MultipathConfig {
    fn default() -> Self {
        Self {
            los_only: true,
            num_nlos_paths: 2,
            nlos_power_db: -10.0,
            nlos_angle_spread: 30.0,
            nlos_excess_delay_max: 50e-9,
        }
    }
}

/// Everything that determines how a CSI sample is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub array: ArrayConfig,
    pub ofdm: OfdmConfig,
    pub multipath: MultipathConfig,
    pub impairment: ImpairmentProfile,
    pub convention: RangeConvention,
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.ofdm.validate()?;
        self.multipath.validate()?;
        self.impairment.validate(self.array.num_antennas)
    }

    pub fn unimpaired() -> Self {
        Self::default()
    }

    pub fn impaired() -> Self {
        let array = ArrayConfig::default();
        Self {
            impairment: ImpairmentProfile::default_angle_dependent(array.num_antennas),
            array,
            ..Self::default()
        }
    }
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::default(),
            ofdm: OfdmConfig::default(),
            multipath: MultipathConfig::los_only(),
            impairment: ImpairmentProfile::None,
            convention: RangeConvention::OneWay,
        }
    }
}

/// Ground truth for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    /// Degrees, positive toward +y.
    pub aoa_deg: f64,
    pub range_m: f64,
    pub toa_s: f64,
}

impl TargetTruth {
    pub fn new(aoa_deg: f64, range_m: f64, convention: RangeConvention) -> Self {
        Self { aoa_deg, range_m, toa_s: convention.toa_from_range(range_m) }
    }

    /// gNB at the origin, boresight along +x.
    pub fn position(&self) -> [f64; 2] {
        polar_to_xy(self.range_m, self.aoa_deg)
    }
}

pub fn polar_to_xy(range_m: f64, aoa_deg: f64) -> [f64; 2] {
    let a = aoa_deg.to_radians();
    [range_m * a.cos(), range_m * a.sin()]
}
