use monopos::estimator::{
    music_baseline, partition_dataset, predict, predict_single, region_seeds, train_parallel, write_records_csv,
    write_records_jsonl, EstimateRecord, Method, MusicOptions, RegionPair, RECORD_CSV_HEADER,
};
use monopos::nn::{train, AoaTarget, NetworkConfig, RegionTag, TrainParams};
use monopos::signal::{
    generate_dataset, polar_to_xy, synthesize_csi, CsiSample, GenerationRanges, RangeConvention, SignalConfig,
    TargetTruth, SPEED_OF_LIGHT,
};
use monopos::subspace::{region_decide, region_for_angle, Region, REGION_BOUNDARY_DEG};

fn tiny_net() -> NetworkConfig {
    NetworkConfig {
        input_rows: 64,
        input_cols: 4,
        patch_rows: 16,
        patch_cols: 4,
        embed_dim: 8,
        num_attention_blocks: 1,
        head_hidden: 8,
        positional_encoding: false,
    }
}

fn hp(epochs: usize, seed: u64) -> TrainParams {
    TrainParams { epochs, batch_size: 8, learning_rate: 1e-3, seed, validation_fraction: 0.0 }
}

fn sample(aoa: f64, range: f64, snr: f64, cfg: &SignalConfig, seed: u64) -> CsiSample {
    synthesize_csi(&TargetTruth::new(aoa, range, cfg.convention), snr, cfg, seed).unwrap()
}

#[test]
fn partition_contract() {
    let cfg = SignalConfig::unimpaired();
    let mut data = generate_dataset(200, &GenerationRanges::default(), &cfg, 3).unwrap();
    data.push(sample(45.0, 4.0, 10.0, &cfg, 1));
    data.push(sample(-45.0, 4.0, 10.0, &cfg, 2));
    data.push(sample(-50.0, 4.0, 10.0, &cfg, 3));
    let (small, large) = partition_dataset(&data, 45.0);
    assert_eq!(small.len() + large.len(), data.len());
    assert!(small.iter().all(|s| s.truth.aoa_deg.abs() <= 45.0));
    assert!(large.iter().all(|s| s.truth.aoa_deg.abs() > 45.0));
    assert!(small.iter().any(|s| s.truth.aoa_deg == 45.0));
    assert!(small.iter().any(|s| s.truth.aoa_deg == -45.0));
    assert!(large.iter().any(|s| s.truth.aoa_deg == -50.0));
}

#[test]
fn polar_position_by_hand() {
    let p = polar_to_xy(2.0, 30.0);
    assert!((p[0] - 3f64.sqrt()).abs() < 1e-12);
    assert!((p[1] - 1.0).abs() < 1e-12);
    let q = polar_to_xy(5.0, 0.0);
    assert_eq!(q, [5.0, 0.0]);
}

#[test]
fn train_parallel_is_reproducible_and_respects_partitions() {
    let cfg = SignalConfig::unimpaired();
    let data = generate_dataset(60, &GenerationRanges::default(), &cfg, 11).unwrap();
    let a = train_parallel(&data, &tiny_net(), &hp(2, 5)).unwrap();
    let b = train_parallel(&data, &tiny_net(), &hp(2, 5)).unwrap();
    assert_eq!(a, b);
    let (small, large) = partition_dataset(&data, REGION_BOUNDARY_DEG);
    let (s, l) = (a.small.as_ref().unwrap(), a.large.as_ref().unwrap());
    assert_eq!(s.meta.num_samples, small.len());
    assert_eq!(l.meta.num_samples, large.len());
    assert_eq!((s.region, l.region), (RegionTag::Small, RegionTag::Large));
    assert_eq!(l.aoa_target, AoaTarget::Magnitude);
    let (ss, ls) = region_seeds(5);
    assert_eq!((s.meta.seed, l.meta.seed), (ss, ls));
    assert_ne!(ss, ls);
}

#[test]
fn empty_side_is_skipped_and_routing_falls_back() {
    let cfg = SignalConfig::unimpaired();
    let ranges = GenerationRanges { aoa_deg: [-30.0, 30.0], ..GenerationRanges::default() };
    let data = generate_dataset(20, &ranges, &cfg, 2).unwrap();
    let pair = train_parallel(&data, &tiny_net(), &hp(1, 1)).unwrap();
    assert!(pair.large.is_none());
    let s = sample(55.0, 5.0, f64::INFINITY, &cfg, 9);
    let r = predict(&s, &pair, &cfg).unwrap();
    assert_eq!(r.region_decided, Region::Large);
    let (aoa, _) = pair.small.as_ref().unwrap().predict(&s.matrix).unwrap();
    assert_eq!(r.est_aoa_deg, aoa);
}

#[test]
fn routing_invokes_the_large_network_at_55_degrees() {
    let cfg = SignalConfig::unimpaired();
    let data = generate_dataset(40, &GenerationRanges::default(), &cfg, 4).unwrap();
    let (small, large) = partition_dataset(&data, 45.0);
    let s_ckpt = train(&small, &tiny_net(), &hp(0, 1), RegionTag::Small).unwrap();
    let l_ckpt = train(&large, &tiny_net(), &hp(0, 2), RegionTag::Large).unwrap();
    let pair = RegionPair::new(Some(s_ckpt.clone()), Some(l_ckpt.clone()), 45.0).unwrap();
    for aoa in [55.0, -55.0] {
        let s = sample(aoa, 5.0, f64::INFINITY, &cfg, 1);
        let r = predict(&s, &pair, &cfg).unwrap();
        let (mag, toa) = l_ckpt.predict(&s.matrix).unwrap();
        assert_eq!(r.region_decided, Region::Large);
        assert_eq!(r.region_true, Region::Large);
        assert_eq!(r.est_aoa_deg, mag.abs().copysign(aoa));
        assert_eq!(r.est_toa_s, toa);
        assert_eq!(r.method, Method::TransformerRegion);
    }
    let s = sample(10.0, 5.0, f64::INFINITY, &cfg, 1);
    let r = predict(&s, &pair, &cfg).unwrap();
    assert_eq!(r.est_aoa_deg, s_ckpt.predict(&s.matrix).unwrap().0);
    assert!(RegionPair::new(Some(l_ckpt), None, 45.0).is_err());
    assert!(RegionPair::new(None, None, 45.0).is_err());
}

#[test]
fn predictions_are_deterministic_and_position_follows_toa() {
    let cfg = SignalConfig::unimpaired();
    let data = generate_dataset(30, &GenerationRanges::default(), &cfg, 8).unwrap();
    let refs: Vec<&CsiSample> = data.iter().collect();
    let ckpt = train(&refs, &tiny_net(), &hp(1, 3), RegionTag::Full).unwrap();
    let s = &data[0];
    let a = predict_single(s, &ckpt, &cfg).unwrap();
    let b = predict_single(s, &ckpt, &cfg).unwrap();
    assert_eq!(a, b);
    let expected = polar_to_xy(a.est_toa_s * SPEED_OF_LIGHT, a.est_aoa_deg);
    assert_eq!(a.est_position, expected);

    let mut rt = cfg.clone();
    rt.convention = RangeConvention::RoundTrip;
    let c = predict_single(s, &ckpt, &rt).unwrap();
    let half = polar_to_xy(a.est_toa_s * SPEED_OF_LIGHT / 2.0, a.est_aoa_deg);
    assert!((c.est_position[0] - half[0]).abs() < 1e-12 && (c.est_position[1] - half[1]).abs() < 1e-12);
}

#[test]
fn noiseless_unimpaired_region_decisions_are_exact() {
    let cfg = SignalConfig::unimpaired();
    let mut checked = 0;
    for tenth in -600..=600 {
        let aoa = f64::from(tenth) / 10.0;
        if (aoa.abs() - 45.0).abs() < 3.0 {
            continue;
        }
        let s = sample(aoa, 6.0, f64::INFINITY, &cfg, 0);
        assert_eq!(region_decide(&s.matrix, &cfg.array, 45.0).unwrap(), region_for_angle(aoa, 45.0), "{aoa}");
        checked += 1;
    }
    assert!(checked > 1000);
}

#[test]
fn impaired_music_is_worse_at_55_than_at_10() {
    let cfg = SignalConfig::impaired();
    let opts = MusicOptions::default();
    let err = |aoa: f64| {
        let s = sample(aoa, 5.0, f64::INFINITY, &cfg, 0);
        music_baseline(&s, &cfg, &opts, false).unwrap().aoa_error_deg().abs()
    };
    assert!(err(55.0) > err(10.0));
    assert!(err(-55.0) > err(-10.0));
}

#[test]
fn calibrated_music_removes_most_of_the_impairment_bias() {
    let cfg = SignalConfig::impaired();
    let opts = MusicOptions::default();
    for aoa in [-58.0, -50.0, 52.0, 57.0] {
        let s = sample(aoa, 5.0, f64::INFINITY, &cfg, 0);
        let raw = music_baseline(&s, &cfg, &opts, false).unwrap();
        let cal = music_baseline(&s, &cfg, &opts, true).unwrap();
        assert!(cal.aoa_error_deg().abs() < raw.aoa_error_deg().abs(), "{aoa}");
    }
}

#[test]
fn joint_music_recovers_a_noiseless_target() {
    let cfg = SignalConfig::unimpaired();
    let s = sample(-25.0, 6.0, f64::INFINITY, &cfg, 0);
    let opts = MusicOptions { joint: true, angle_step_deg: 0.5, ..MusicOptions::default() };
    let r = music_baseline(&s, &cfg, &opts, false).unwrap();
    assert!(r.aoa_error_deg().abs() < 0.5);
    // one delay step of the decimated grid is 1/(100 · Δf · K)
    assert!(r.toa_error_s().abs() < 1.0 / (100.0 * 30e3 * 64.0));
}

#[test]
fn position_error_respects_the_arc_bound() {
    let cfg = SignalConfig::impaired();
    let data = generate_dataset(100, &GenerationRanges::default(), &cfg, 21).unwrap();
    for s in &data {
        let r = music_baseline(s, &cfg, &MusicOptions::default(), false).unwrap();
        let bound = s.truth.range_m * r.aoa_error_deg().to_radians().abs() + SPEED_OF_LIGHT * r.toa_error_s().abs();
        assert!(r.position_error_m() <= bound + 1e-9, "{} > {bound}", r.position_error_m());
    }
}

#[test]
fn records_stream_to_jsonl_and_csv() {
    let cfg = SignalConfig::unimpaired();
    let data = generate_dataset(3, &GenerationRanges::default(), &cfg, 5).unwrap();
    let recs: Vec<EstimateRecord> =
        data.iter().map(|s| music_baseline(s, &cfg, &MusicOptions::default(), false).unwrap()).collect();
    let mut j = Vec::new();
    write_records_jsonl(&mut j, &recs).unwrap();
    let back: Vec<EstimateRecord> =
        String::from_utf8(j).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, recs);
    let mut c = Vec::new();
    write_records_csv(&mut c, &recs).unwrap();
    let text = String::from_utf8(c).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], RECORD_CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("music,"));
    assert_eq!(lines[1].split(',').count(), RECORD_CSV_HEADER.split(',').count());
}
