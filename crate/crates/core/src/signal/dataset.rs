//! Labelled dataset generation and on-disk formats.
//!
//! Text format: one JSON object per line carrying `schema_version`,
//! `configs_hash`, `snr_db` (`null` when noiseless), `truth`, `seed`,
//! `impairment_mode`, the matrix shape and the matrix as row-major
//! `[re, im]` pairs.
//!
//! Binary format (little-endian): `b"MPOS"`, a version byte, `rows: u32`,
//! `cols: u32`, `count: u64`, the 16-byte ASCII configs hash, then per record
//! `snr_db, aoa_deg, range_m, toa_s: f64`, `seed: u64`, `impairment_mode: u8`
//! and `rows·cols` `(re, im)` f64 pairs in row-major order.

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{synthesize_csi, CsiSample, ImpairmentMode, SignalConfig, TargetTruth};
use crate::error::{config_err, Error, Result};
use crate::linalg::CMatrix;

pub const SCHEMA_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 4] = b"MPOS";
const BINARY_VERSION: u8 = 1;
const HASH_LEN: usize = 16;

/// Closed intervals from which labels are drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRanges {
    pub snr_db: [f64; 2],
    pub range_m: [f64; 2],
    pub aoa_deg: [f64; 2],
}

impl Default for GenerationRanges {
    fn default() -> Self {
        Self { snr_db: [-10.0, 30.0], range_m: [3.0, 10.0], aoa_deg: [-60.0, 60.0] }
    }
}

impl GenerationRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in
            [("snr_db", self.snr_db), ("range_m", self.range_m), ("aoa_deg", self.aoa_deg)]
        {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(config_err(format!("{name} range [{lo}, {hi}] is degenerate")));
            }
        }
        if self.range_m[0] <= 0.0 {
            return Err(config_err("range_m must be positive"));
        }
        if self.aoa_deg[0] < -90.0 || self.aoa_deg[1] > 90.0 {
            return Err(config_err("aoa_deg must lie within [-90, 90]"));
        }
        Ok(())
    }
}

/// Generates `count` samples; sample `i` is fully determined by `seed ^ i`.
pub fn generate_dataset(
    count: usize,
    ranges: &GenerationRanges,
    cfg: &SignalConfig,
    seed: u64,
) -> Result<Vec<CsiSample>> {
    if count == 0 {
        return Err(config_err("dataset count must be >= 1"));
    }
    ranges.validate()?;
    cfg.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let sample_seed = seed ^ i;
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
            let aoa = rng.gen_range(ranges.aoa_deg[0]..=ranges.aoa_deg[1]);
            let range = rng.gen_range(ranges.range_m[0]..=ranges.range_m[1]);
            let snr = rng.gen_range(ranges.snr_db[0]..=ranges.snr_db[1]);
            let truth = TargetTruth::new(aoa, range, cfg.convention);
            synthesize_csi(&truth, snr, cfg, sample_seed)
        })
        .collect()
}

/// Short stable digest of the generating configuration.
pub fn configs_hash(cfg: &SignalConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("signal config serialises");
    let digest = Sha256::digest(&bytes);
    digest[..HASH_LEN / 2].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthRecord {
    aoa_deg: f64,
    range_m: f64,
    toa_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    schema_version: u32,
    configs_hash: String,
    snr_db: Option<f64>,
    truth: TruthRecord,
    seed: u64,
    impairment_mode: ImpairmentMode,
    rows: usize,
    cols: usize,
    matrix: Vec<[f64; 2]>,
}

/// A dataset read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub configs_hash: String,
    pub samples: Vec<CsiSample>,
}

pub fn write_jsonl<W: Write>(mut out: W, samples: &[CsiSample], configs_hash: &str) -> Result<()> {
    for s in samples {
        let record = SampleRecord {
            schema_version: SCHEMA_VERSION,
            configs_hash: configs_hash.to_owned(),
            snr_db: s.snr_db.is_finite().then_some(s.snr_db),
            truth: TruthRecord { aoa_deg: s.truth.aoa_deg, range_m: s.truth.range_m, toa_s: s.truth.toa_s },
            seed: s.seed,
            impairment_mode: s.impairment_mode,
            rows: s.matrix.rows(),
            cols: s.matrix.cols(),
            matrix: s.matrix.as_slice().iter().map(|v| [v.re, v.im]).collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(mut out: W, samples: &[CsiSample], configs_hash: &str) -> Result<()> {
    let (rows, cols) = samples.first().map(|s| s.matrix.shape()).unwrap_or((0, 0));
    let hash = configs_hash.as_bytes();
    if hash.len() != HASH_LEN {
        return Err(Error::Format(format!("configs hash must be {HASH_LEN} bytes")));
    }
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&[BINARY_VERSION])?;
    out.write_all(&(rows as u32).to_le_bytes())?;
    out.write_all(&(cols as u32).to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    out.write_all(hash)?;
    for s in samples {
        if s.matrix.shape() != (rows, cols) {
            return Err(Error::Format("binary datasets require a uniform matrix shape".into()));
        }
        for v in [s.snr_db, s.truth.aoa_deg, s.truth.range_m, s.truth.toa_s] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&s.seed.to_le_bytes())?;
        out.write_all(&[mode_byte(s.impairment_mode)])?;
        for v in s.matrix.as_slice() {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn mode_byte(mode: ImpairmentMode) -> u8 {
    match mode {
        ImpairmentMode::None => 0,
        ImpairmentMode::Diagonal => 1,
        ImpairmentMode::AngleDependent => 2,
    }
}

fn mode_from_byte(b: u8) -> Result<ImpairmentMode> {
    match b {
        0 => Ok(ImpairmentMode::None),
        1 => Ok(ImpairmentMode::Diagonal),
        2 => Ok(ImpairmentMode::AngleDependent),
        other => Err(Error::Format(format!("unknown impairment mode byte {other}"))),
    }
}

/// Reads either format, detected from the leading magic bytes.
pub fn read_dataset<R: Read>(input: R) -> Result<DatasetFile> {
    let mut reader = BufReader::new(input);
    let is_binary = reader.fill_buf()?.starts_with(BINARY_MAGIC);
    if is_binary {
        read_binary(reader)
    } else {
        read_jsonl(reader)
    }
}

fn read_jsonl<R: BufRead>(reader: R) -> Result<DatasetFile> {
    let mut samples = Vec::new();
    let mut hash: Option<String> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "line {}: unsupported schema_version {}",
                lineno + 1,
                rec.schema_version
            )));
        }
        match &hash {
            None => hash = Some(rec.configs_hash.clone()),
            Some(h) if *h != rec.configs_hash => {
                return Err(Error::Format(format!("line {}: mixed configs_hash", lineno + 1)))
            }
            _ => {}
        }
        let data = rec.matrix.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        let matrix = CMatrix::from_vec(rec.rows, rec.cols, data)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        samples.push(CsiSample {
            matrix,
            truth: TargetTruth { aoa_deg: rec.truth.aoa_deg, range_m: rec.truth.range_m, toa_s: rec.truth.toa_s },
            snr_db: rec.snr_db.unwrap_or(f64::INFINITY),
            seed: rec.seed,
            impairment_mode: rec.impairment_mode,
        });
    }
    Ok(DatasetFile { configs_hash: hash.unwrap_or_default(), samples })
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_binary<R: Read>(mut r: R) -> Result<DatasetFile> {
    let magic = read_exact::<4>(&mut r)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let [version] = read_exact::<1>(&mut r)?;
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported binary version {version}")));
    }
    let rows = u32::from_le_bytes(read_exact::<4>(&mut r)?) as usize;
    let cols = u32::from_le_bytes(read_exact::<4>(&mut r)?) as usize;
    let count = u64::from_le_bytes(read_exact::<8>(&mut r)?) as usize;
    let hash = read_exact::<HASH_LEN>(&mut r)?;
    let configs_hash = String::from_utf8(hash.to_vec()).map_err(|e| Error::Format(e.to_string()))?;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let snr_db = read_f64(&mut r)?;
        let aoa_deg = read_f64(&mut r)?;
        let range_m = read_f64(&mut r)?;
        let toa_s = read_f64(&mut r)?;
        let seed = u64::from_le_bytes(read_exact::<8>(&mut r)?);
        let [mode] = read_exact::<1>(&mut r)?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(Complex64::new(re, im));
        }
        samples.push(CsiSample {
            matrix: CMatrix::from_vec(rows, cols, data)?,
            truth: TargetTruth { aoa_deg, range_m, toa_s },
            snr_db,
            seed,
            impairment_mode: mode_from_byte(mode)?,
        });
    }
    Ok(DatasetFile { configs_hash, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_cfg() -> SignalConfig {
        let mut cfg = SignalConfig::impaired();
        cfg.ofdm.num_subcarriers = 8;
        cfg
    }

    #[test]
    fn counts_and_ranges() {
        let cfg = small_cfg();
        let ranges = GenerationRanges::default();
        let one = generate_dataset(1, &ranges, &cfg, 3).unwrap();
        assert_eq!(one.len(), 1);
        let many = generate_dataset(500, &ranges, &cfg, 3).unwrap();
        assert_eq!(many.len(), 500);
        assert_eq!(many[0], one[0]);
        for s in &many {
            assert!((-60.0..=60.0).contains(&s.truth.aoa_deg));
            assert!((3.0..=10.0).contains(&s.truth.range_m));
            assert!((-10.0..=30.0).contains(&s.snr_db));
        }
        assert!(generate_dataset(0, &ranges, &cfg, 3).is_err());
        let bad = GenerationRanges { range_m: [5.0, 5.0], ..ranges };
        assert!(generate_dataset(1, &bad, &cfg, 3).is_err());
    }

    #[test]
    fn paper_scale_count() {
        let cfg = small_cfg();
        let samples = generate_dataset(20_000, &GenerationRanges::default(), &cfg, 11).unwrap();
        assert_eq!(samples.len(), 20_000);
    }

    #[test]
    fn noiseless_sample_survives_text_format() {
        let cfg = small_cfg();
        let truth = TargetTruth::new(5.0, 4.0, cfg.convention);
        let s = synthesize_csi(&truth, f64::INFINITY, &cfg, 1).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&s), &configs_hash(&cfg)).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"snr_db\":null"));
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back.samples, vec![s]);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(matches!(read_dataset(&b"{\"schema_version\":1}\n"[..]), Err(Error::Format(_))));
        let mut bin = BINARY_MAGIC.to_vec();
        bin.push(9);
        assert!(read_dataset(bin.as_slice()).is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = configs_hash(&small_cfg());
        assert_eq!(a.len(), 16);
        assert_eq!(a, configs_hash(&small_cfg()));
        assert_ne!(a, configs_hash(&SignalConfig::default()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn both_formats_round_trip(seed in any::<u64>(), count in 1usize..6) {
            let cfg = small_cfg();
            let samples = generate_dataset(count, &GenerationRanges::default(), &cfg, seed).unwrap();
            let hash = configs_hash(&cfg);
            let mut text = Vec::new();
            write_jsonl(&mut text, &samples, &hash).unwrap();
            let mut bin = Vec::new();
            write_binary(&mut bin, &samples, &hash).unwrap();
            for bytes in [text, bin] {
                let back = read_dataset(bytes.as_slice()).unwrap();
                prop_assert_eq!(&back.configs_hash, &hash);
                prop_assert_eq!(&back.samples, &samples);
            }
        }
    }
}
