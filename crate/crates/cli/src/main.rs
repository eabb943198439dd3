mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use monopos::bench::{emit_report, percentile, run_sweep, Artifacts};
use monopos::estimator::{music_baseline, partition_dataset, region_seeds, train_parallel, Method, MusicOptions, RegionPair};
use monopos::nn::{export_attention, train, write_attention_csv, ModelCheckpoint, RegionTag, TrainParams};
use monopos::signal::{
    configs_hash, generate_dataset, read_dataset, synthesize_csi, write_binary, write_jsonl, CsiSample, TargetTruth,
};
use monopos::subspace::{angle_grid, music_angle_spectrum, spatial_covariance, REGION_BOUNDARY_DEG};
use monopos::Error;

use config::{parse_methods, RunConfig, SEED_ENV};

/// Monostatic OFDM positioning: dataset generation, region-split training,
/// MUSIC baselines and SNR-sweep evaluation.
#[derive(Debug, Parser)]
#[command(name = "monopos", version, after_help = format!("Environment: {SEED_ENV} overrides the config seed."))]
struct Cli {
    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 runs everything serially.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegionArg {
    Small,
    Large,
    Full,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled CSI dataset.
    Gen {
        /// Number of samples.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Output file; defaults to paths.dataset.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the compact binary layout instead of JSON lines.
        #[arg(long)]
        binary: bool,
    },
    /// Train a network on one angular region, the full range, or both regions.
    Train {
        /// Dataset file; defaults to paths.dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        region: RegionArg,
        /// Checkpoint directory; defaults to paths.checkpoints.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the SNR sweep and write the report.
    Eval {
        /// Checkpoint directory; defaults to paths.checkpoints.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Comma-separated methods: music, music_calibrated,
        /// transformer_single, transformer_region. Defaults to sweep.methods.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Report directory; defaults to paths.reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the first block's attention map averaged over a dataset.
    Attention {
        checkpoint: PathBuf,
        dataset: PathBuf,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// MUSIC estimate of one synthetic sample, for debugging.
    Music {
        /// Degrees.
        #[arg(long, allow_hyphen_values = true)]
        aoa: f64,
        /// Meters.
        #[arg(long)]
        range: f64,
        /// dB; "inf" for a noiseless sample.
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        snr: f64,
        /// Joint angle-delay search.
        #[arg(long)]
        joint: bool,
        /// Repeat the search after removing the configured impairment.
        #[arg(long)]
        calibrated: bool,
        /// Write the angle pseudospectrum as CSV.
        #[arg(long)]
        spectrum_out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Index { .. } | Error::Shape(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        Error::Numeric(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen { count, out, binary } => cmd_gen(&cfg, *count as usize, out.as_deref(), *binary),
        Command::Train { dataset, region, out } => cmd_train(&cfg, dataset.as_deref(), *region, out.as_deref()),
        Command::Eval { checkpoints, methods, out } => {
            cmd_eval(&cfg, checkpoints.as_deref(), methods.as_deref(), out.as_deref())
        }
        Command::Attention { checkpoint, dataset, out } => cmd_attention(checkpoint, dataset, out),
        Command::Music { aoa, range, snr, joint, calibrated, spectrum_out } => {
            cmd_music(&cfg, *aoa, *range, *snr, *joint, *calibrated, spectrum_out.as_deref())
        }
    }
}

/// Opens `path`, naming it in the error.
fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => Ok(fs::create_dir_all(p)?),
        _ => Ok(()),
    }
}

fn cmd_gen(cfg: &RunConfig, count: usize, out: Option<&Path>, binary: bool) -> Result<(), Error> {
    let signal = cfg.signal()?;
    let ranges = cfg.generation_ranges();
    let samples = generate_dataset(count, &ranges, &signal, cfg.seed)?;
    let path = out.unwrap_or(&cfg.paths.dataset);
    create_parent(path)?;
    let hash = configs_hash(&signal);
    let mut w = create(path)?;
    if binary {
        write_binary(&mut w, &samples, &hash)?;
    } else {
        write_jsonl(&mut w, &samples, &hash)?;
    }
    w.flush()?;
    println!(
        "generated {count} samples: snr_db [{}, {}], range_m [{}, {}], aoa_deg [{}, {}], impairment {}, seed {}, config {hash}",
        ranges.snr_db[0],
        ranges.snr_db[1],
        ranges.range_m[0],
        ranges.range_m[1],
        ranges.aoa_deg[0],
        ranges.aoa_deg[1],
        signal.impairment.mode(),
        cfg.seed,
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn load_dataset(cfg: &RunConfig, path: &Path) -> Result<Vec<CsiSample>, Error> {
    let file = read_dataset(open(path)?)?;
    let expected = configs_hash(&cfg.signal()?);
    if file.configs_hash != expected {
        log::warn!(
            "{} was generated with config {} but the current config is {expected}",
            path.display(),
            file.configs_hash
        );
    }
    Ok(file.samples)
}

fn checkpoint_path(dir: &Path, tag: RegionTag) -> PathBuf {
    dir.join(format!("{tag}.json"))
}

fn save_checkpoint(dir: &Path, ckpt: &ModelCheckpoint) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let path = checkpoint_path(dir, ckpt.region);
    let mut w = create(&path)?;
    ckpt.write_json(&mut w)?;
    w.flush()?;
    println!(
        "wrote {} ({} samples, {} epochs, final loss {})",
        path.display(),
        ckpt.meta.num_samples,
        ckpt.meta.epochs,
        ckpt.meta.final_loss.map_or_else(|| "n/a".to_string(), |l| format!("{l:.6}"))
    );
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint, Error> {
    ModelCheckpoint::read_json(open(path)?)
}

fn cmd_train(cfg: &RunConfig, dataset: Option<&Path>, region: RegionArg, out: Option<&Path>) -> Result<(), Error> {
    let samples = load_dataset(cfg, dataset.unwrap_or(&cfg.paths.dataset))?;
    let net = cfg.network();
    let hp = cfg.train_params();
    let out = out.unwrap_or(&cfg.paths.checkpoints);
    let (small_seed, large_seed) = region_seeds(hp.seed);
    let one = |part: &[&CsiSample], seed: u64, tag: RegionTag| -> Result<(), Error> {
        let ckpt = train(part, &net, &TrainParams { seed, ..hp }, tag)?;
        save_checkpoint(out, &ckpt)
    };
    match region {
        RegionArg::Full => {
            let all: Vec<&CsiSample> = samples.iter().collect();
            one(&all, hp.seed, RegionTag::Full)
        }
        RegionArg::Small => one(&partition_dataset(&samples, REGION_BOUNDARY_DEG).0, small_seed, RegionTag::Small),
        RegionArg::Large => one(&partition_dataset(&samples, REGION_BOUNDARY_DEG).1, large_seed, RegionTag::Large),
        RegionArg::Both => {
            let pair = train_parallel(&samples, &net, &hp)?;
            for ckpt in [&pair.small, &pair.large].into_iter().flatten() {
                save_checkpoint(out, ckpt)?;
            }
            Ok(())
        }
    }
}

fn load_artifacts(dir: &Path, methods: &[Method], music: MusicOptions) -> Result<Artifacts, Error> {
    let mut art = Artifacts { music, ..Artifacts::default() };
    let need = |tag: RegionTag| -> Result<ModelCheckpoint, Error> {
        let path = checkpoint_path(dir, tag);
        if !path.exists() {
            return Err(Error::Config(format!("missing checkpoint {}", path.display())));
        }
        load_checkpoint(&path)
    };
    if methods.contains(&Method::TransformerSingle) {
        art.single = Some(need(RegionTag::Full)?);
    }
    if methods.contains(&Method::TransformerRegion) {
        let small = checkpoint_path(dir, RegionTag::Small).exists().then(|| need(RegionTag::Small)).transpose()?;
        let large = checkpoint_path(dir, RegionTag::Large).exists().then(|| need(RegionTag::Large)).transpose()?;
        if small.is_none() && large.is_none() {
            return Err(Error::Config(format!("no small.json or large.json checkpoint in {}", dir.display())));
        }
        art.pair = Some(RegionPair::new(small, large, REGION_BOUNDARY_DEG)?);
    }
    Ok(art)
}

const ATTENTION_SAMPLES: usize = 100;

fn cmd_eval(cfg: &RunConfig, checkpoints: Option<&Path>, methods: Option<&[String]>, out: Option<&Path>) -> Result<(), Error> {
    let signal = cfg.signal()?;
    let mut spec = cfg.sweep_spec()?;
    if let Some(m) = methods {
        spec.methods = parse_methods(m)?;
    }
    let music = MusicOptions { joint: cfg.sweep.joint_music, ..MusicOptions::default() };
    let art = load_artifacts(checkpoints.unwrap_or(&cfg.paths.checkpoints), &spec.methods, music)?;
    let result = run_sweep(&spec, &signal, &art)?;

    // attention over the samples of the last SNR point
    let network = art.single.as_ref().or(art.pair.as_ref().and_then(|p| p.small.as_ref().or(p.large.as_ref())));
    let attention = match network {
        Some(ckpt) => {
            let last = spec.snr_points.len() - 1;
            let samples: Vec<CsiSample> = (0..spec.trials_per_point.min(ATTENTION_SAMPLES))
                .map(|t| spec.sample(last, t, &signal))
                .collect::<Result<_, _>>()?;
            Some(export_attention(ckpt, samples.iter().map(|s| &s.matrix))?)
        }
        None => None,
    };
    let out = out.unwrap_or(&cfg.paths.reports);
    let written = emit_report(&result.table, &result.records, attention.as_ref(), out)?;
    println!(
        "{} records over {} SNR points x {} trials; wrote {} files to {}",
        result.records.len(),
        spec.snr_points.len(),
        spec.trials_per_point,
        written.len(),
        out.display()
    );
    for (method, e) in &result.table.errors {
        println!(
            "{method}: p90 aoa error {:.4} deg, p90 toa error {:.4} ns, p90 position error {:.4} m",
            percentile(&e.aoa_deg, 0.9)?,
            percentile(&e.toa_ns, 0.9)?,
            percentile(&e.pos_m, 0.9)?
        );
    }
    Ok(())
}

fn cmd_attention(checkpoint: &Path, dataset: &Path, out: &Path) -> Result<(), Error> {
    let ckpt = load_checkpoint(checkpoint)?;
    let data = read_dataset(open(dataset)?)?;
    let map = export_attention(&ckpt, data.samples.iter().map(|s| &s.matrix))?;
    create_parent(out)?;
    let mut w = create(out)?;
    write_attention_csv(&map, &mut w)?;
    w.flush()?;
    println!(
        "attention map shape: {} x {} (averaged over {} samples); wrote {}",
        map.rows(),
        map.cols(),
        data.samples.len(),
        out.display()
    );
    Ok(())
}

fn cmd_music(
    cfg: &RunConfig,
    aoa: f64,
    range: f64,
    snr: f64,
    joint: bool,
    calibrated: bool,
    spectrum_out: Option<&Path>,
) -> Result<(), Error> {
    let signal = cfg.signal()?;
    let truth = TargetTruth::new(aoa, range, signal.convention);
    let sample = synthesize_csi(&truth, snr, &signal, cfg.seed)?;
    let opts = MusicOptions { joint, ..MusicOptions::default() };
    let r = music_baseline(&sample, &signal, &opts, calibrated)?;
    println!("method {}", r.method);
    println!("truth: aoa {aoa} deg, range {range} m, toa {:.4} ns", truth.toa_s * 1e9);
    println!(
        "estimate: aoa {:.4} deg, toa {:.4} ns, position ({:.4}, {:.4}) m, region {}",
        r.est_aoa_deg,
        r.est_toa_s * 1e9,
        r.est_position[0],
        r.est_position[1],
        r.region_decided
    );
    println!(
        "error: aoa {:.4} deg, toa {:.4} ns, position {:.4} m",
        r.aoa_error_deg(),
        r.toa_error_s() * 1e9,
        r.position_error_m()
    );
    if let Some(path) = spectrum_out {
        let spectrum =
            music_angle_spectrum(&spatial_covariance(&sample.matrix)?, 1, &angle_grid(-90.0, 90.0, 0.1), &signal.array)?;
        create_parent(path)?;
        let mut w = create(path)?;
        spectrum.write_csv(&mut w, "aoa_deg")?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
