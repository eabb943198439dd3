//! Run configuration file: one TOML document with nested sections, unknown
//! keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use monopos::bench::SweepSpec;
use monopos::estimator::Method;
use monopos::nn::{NetworkConfig, TrainParams};
use monopos::signal::{
    AngleTable, ArrayConfig, GenerationRanges, ImpairmentProfile, MultipathConfig, OfdmConfig, RangeConvention,
    SignalConfig,
};
use monopos::Error;
use num_complex::Complex64;
use serde::Deserialize;

pub const SEED_ENV: &str = "MONOPOS_SEED";

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub num_antennas: usize,
    pub carrier_frequency: f64,
    /// Meters; half a wavelength when omitted.
    pub element_spacing: Option<f64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        let a = ArrayConfig::default();
        Self { num_antennas: a.num_antennas, carrier_frequency: a.carrier_frequency, element_spacing: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmSection {
    pub num_subcarriers: usize,
    pub subcarrier_spacing: f64,
}

impl Default for OfdmSection {
    fn default() -> Self {
        let o = OfdmConfig::default();
        Self { num_subcarriers: o.num_subcarriers, subcarrier_spacing: o.subcarrier_spacing }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpairmentModeName {
    None,
    Diagonal,
    AngleDependent,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentSection {
    pub mode: ImpairmentModeName,
    /// Diagonal mode: per-antenna `[re, im]` pairs, reference antenna first.
    pub coefficients: Option<Vec<[f64; 2]>>,
    /// Angle-dependent mode: TOML file with `angles_deg` and `coefficients`
    /// (one row of `[re, im]` pairs per angle). The built-in profile is used
    /// when omitted.
    pub calibration_file: Option<PathBuf>,
}

impl Default for ImpairmentSection {
    fn default() -> Self {
        Self { mode: ImpairmentModeName::AngleDependent, coefficients: None, calibration_file: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainParams::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            validation_fraction: t.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub snr_points: Vec<f64>,
    pub trials_per_point: usize,
    pub methods: Vec<String>,
    pub aoa_deg: [f64; 2],
    pub range_m: [f64; 2],
    /// Use the joint angle-delay search for the MUSIC methods.
    pub joint_music: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepSpec::default();
        Self {
            snr_points: s.snr_points,
            trials_per_point: s.trials_per_point,
            methods: s.methods.iter().map(|m| m.to_string()).collect(),
            aoa_deg: s.aoa_deg,
            range_m: s.range_m,
            joint_music: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            dataset: "data/dataset.jsonl".into(),
            checkpoints: "checkpoints".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub convention: RangeConvention,
    pub array: ArraySection,
    pub ofdm: OfdmSection,
    pub multipath: MultipathConfigSection,
    pub impairment: ImpairmentSection,
    pub generation: GenerationSection,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub sweep: SweepSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultipathConfigSection {
    pub los_only: bool,
    pub num_nlos_paths: usize,
    pub nlos_power_db: f64,
    pub nlos_angle_spread: f64,
    /// Seconds.
    pub nlos_excess_delay_max: f64,
}

impl Default for MultipathConfigSection {
    fn default() -> Self {
        let m = MultipathConfig::default();
        Self {
            los_only: m.los_only,
            num_nlos_paths: m.num_nlos_paths,
            nlos_power_db: m.nlos_power_db,
            nlos_angle_spread: m.nlos_angle_spread,
            nlos_excess_delay_max: m.nlos_excess_delay_max,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub snr_db: [f64; 2],
    pub range_m: [f64; 2],
    pub aoa_deg: [f64; 2],
}

impl Default for GenerationSection {
    fn default() -> Self {
        let g = GenerationRanges::default();
        Self { snr_db: g.snr_db, range_m: g.range_m, aoa_deg: g.aoa_deg }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub embed_dim: usize,
    pub num_attention_blocks: usize,
    pub head_hidden: usize,
    pub positional_encoding: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let n = NetworkConfig::default();
        Self {
            patch_rows: n.patch_rows,
            patch_cols: n.patch_cols,
            embed_dim: n.embed_dim,
            num_attention_blocks: n.num_attention_blocks,
            head_hidden: n.head_hidden,
            positional_encoding: n.positional_encoding,
        }
    }
}

fn pairs_to_complex(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    angles_deg: Vec<f64>,
    coefficients: Vec<Vec<[f64; 2]>>,
}

impl RunConfig {
    /// Parses and validates `path`, or the defaults when `path` is `None`.
    /// `MONOPOS_SEED` overrides the seed.
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.to_string().trim_end())))?
            }
            None => RunConfig::default(),
        };
        if let Ok(s) = std::env::var(SEED_ENV) {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned 64-bit integer")))?;
        }
        let base = path.and_then(Path::parent).unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(f) = &self.impairment.calibration_file {
            if f.is_relative() {
                self.impairment.calibration_file = Some(base.join(f));
            }
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.signal()?.validate()?;
        self.generation_ranges().validate()?;
        self.network().validate()?;
        self.sweep_spec()?.validate()?;
        let t = &self.training;
        if t.batch_size == 0 {
            return Err(Error::Config("training.batch_size must be >= 1".into()));
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(Error::Config("training.learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&t.validation_fraction) {
            return Err(Error::Config("training.validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn signal(&self) -> Result<SignalConfig, Error> {
        let a = &self.array;
        let mut array = ArrayConfig::half_wavelength(a.num_antennas, a.carrier_frequency);
        if let Some(d) = a.element_spacing {
            array.element_spacing = d;
        }
        let ofdm = OfdmConfig::new(self.ofdm.num_subcarriers, self.ofdm.subcarrier_spacing);
        let m = &self.multipath;
        let multipath = MultipathConfig {
            los_only: m.los_only,
            num_nlos_paths: m.num_nlos_paths,
            nlos_power_db: m.nlos_power_db,
            nlos_angle_spread: m.nlos_angle_spread,
            nlos_excess_delay_max: m.nlos_excess_delay_max,
        };
        let imp = &self.impairment;
        let impairment = match imp.mode {
            ImpairmentModeName::None => ImpairmentProfile::None,
            ImpairmentModeName::Diagonal => {
                let c = imp
                    .coefficients
                    .as_ref()
                    .ok_or_else(|| Error::Config("impairment.mode = \"diagonal\" needs impairment.coefficients".into()))?;
                ImpairmentProfile::Diagonal { coefficients: pairs_to_complex(c) }
            }
            ImpairmentModeName::AngleDependent => match &imp.calibration_file {
                None => ImpairmentProfile::default_angle_dependent(array.num_antennas),
                Some(f) => {
                    let text = fs::read_to_string(f)?;
                    let doc: CalibrationDoc = toml::from_str(&text)
                        .map_err(|e| Error::Config(format!("{}: {}", f.display(), e.to_string().trim_end())))?;
                    ImpairmentProfile::AngleDependent(AngleTable {
                        angles_deg: doc.angles_deg,
                        coefficients: doc.coefficients.iter().map(|r| pairs_to_complex(r)).collect(),
                    })
                }
            },
        };
        if imp.mode != ImpairmentModeName::Diagonal && imp.coefficients.is_some() {
            return Err(Error::Config("impairment.coefficients is only used with mode = \"diagonal\"".into()));
        }
        Ok(SignalConfig { array, ofdm, multipath, impairment, convention: self.convention })
    }

    pub fn generation_ranges(&self) -> GenerationRanges {
        let g = &self.generation;
        GenerationRanges { snr_db: g.snr_db, range_m: g.range_m, aoa_deg: g.aoa_deg }
    }

    pub fn network(&self) -> NetworkConfig {
        let n = &self.network;
        NetworkConfig {
            input_rows: self.ofdm.num_subcarriers,
            input_cols: self.array.num_antennas,
            patch_rows: n.patch_rows,
            patch_cols: n.patch_cols,
            embed_dim: n.embed_dim,
            num_attention_blocks: n.num_attention_blocks,
            head_hidden: n.head_hidden,
            positional_encoding: n.positional_encoding,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        let t = &self.training;
        TrainParams {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: self.seed,
            validation_fraction: t.validation_fraction,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, Error> {
        let s = &self.sweep;
        Ok(SweepSpec {
            snr_points: s.snr_points.clone(),
            trials_per_point: s.trials_per_point,
            methods: parse_methods(&s.methods)?,
            seed: self.seed,
            aoa_deg: s.aoa_deg,
            range_m: s.range_m,
        })
    }
}

pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>, Error> {
    let mut out = Vec::new();
    for n in names {
        let m: Method = n.as_ref().trim().parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}
