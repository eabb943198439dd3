use std::collections::BTreeMap;
use std::fs;

use monopos::bench::{emit_report, rmse, run_sweep, Artifacts, MetricTable, SweepSpec, REPORT_FILES};
use monopos::estimator::Method;
use monopos::signal::SignalConfig;
use monopos::Error;

fn music_spec(trials: usize) -> SweepSpec {
    SweepSpec { trials_per_point: trials, methods: vec![Method::Music], seed: 17, ..SweepSpec::default() }
}

#[test]
fn record_count_is_points_times_trials_times_methods() {
    let spec = SweepSpec { methods: vec![Method::Music, Method::MusicCalibrated], ..music_spec(3) };
    let res = run_sweep(&spec, &SignalConfig::impaired(), &Artifacts::default()).unwrap();
    assert_eq!(res.records.len(), 9 * 3 * 2);
    assert_eq!(res.table.rows.len(), 9 * 2);
    assert!(res.table.rows.iter().all(|r| r.count == 3));
}

#[test]
fn missing_checkpoint_is_config_error() {
    let spec = SweepSpec { methods: vec![Method::TransformerRegion], ..music_spec(1) };
    let err = run_sweep(&spec, &SignalConfig::default(), &Artifacts::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn music_rmse_trends_down_with_snr() {
    let res = run_sweep(&music_spec(40), &SignalConfig::unimpaired(), &Artifacts::default()).unwrap();
    let aoa: Vec<f64> = res.table.rows.iter().map(|r| r.rmse_aoa_deg).collect();
    let violations = aoa.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(violations <= 1, "{aoa:?}");
    assert!(aoa[aoa.len() - 1] < aoa[0]);
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn report_is_deterministic_and_self_consistent() {
    let cfg = SignalConfig::impaired();
    let spec = SweepSpec { methods: vec![Method::Music, Method::MusicCalibrated], ..music_spec(6) };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let res = run_sweep(&spec, &cfg, &Artifacts::default()).unwrap();
        let written = emit_report(&res.table, &res.records, None, d.path()).unwrap();
        assert_eq!(written.len(), REPORT_FILES.len());
    }
    for name in REPORT_FILES {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let dir = dirs[0].path();

    // recompute every RMSE from the raw per-record errors
    let records = parse_csv(&fs::read_to_string(dir.join("records.csv")).unwrap());
    let mut groups: BTreeMap<(String, String), [Vec<f64>; 3]> = BTreeMap::new();
    for r in &records {
        let e = groups.entry((r[0].clone(), r[1].clone())).or_default();
        for (k, col) in [11, 12, 13].into_iter().enumerate() {
            e[k].push(r[col].parse().unwrap());
        }
    }
    let rows = parse_csv(&fs::read_to_string(dir.join("rmse_vs_snr.csv")).unwrap());
    assert_eq!(rows.len(), 2 * 9);
    for row in &rows {
        let errs = &groups[&(row[0].clone(), row[1].clone())];
        for k in 0..3 {
            assert_eq!(row[2 + k].parse::<f64>().unwrap(), rmse(&errs[k]).unwrap());
        }
    }

    // CDF files start above zero, end at exactly one, and are monotone
    for name in ["cdf_aoa.csv", "cdf_toa.csv", "cdf_pos.csv"] {
        let rows = parse_csv(&fs::read_to_string(dir.join(name)).unwrap());
        for method in ["music", "music_calibrated"] {
            let mine: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r[0] == method)
                .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
                .collect();
            assert_eq!(mine.last().unwrap().1, 1.0);
            assert!(mine[0].1 > 0.0);
            assert!(mine.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        }
    }
    for name in REPORT_FILES.iter().filter(|n| n.ends_with(".svg")) {
        let svg = fs::read_to_string(dir.join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("</svg>"));
    }
    assert!(!fs::read_dir(dir).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn empty_method_list_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let table = MetricTable::from_records(&[], &[], &[0.0]).unwrap();
    assert!(emit_report(&table, &[], None, &out).is_err());
    assert!(!out.exists());
}

#[test]
fn unwritable_directory_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let res = run_sweep(&music_spec(1), &SignalConfig::default(), &Artifacts::default()).unwrap();
    let err = emit_report(&res.table, &res.records, None, &blocker.join("sub")).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}
