use monopos::linalg::CMatrix;
use monopos::nn::{
    export_attention, train, write_attention_csv, ModelCheckpoint, NetworkConfig, RegionTag, TrainParams,
};
use monopos::signal::{generate_dataset, CsiSample, GenerationRanges, SignalConfig};

fn small_net() -> NetworkConfig {
    NetworkConfig {
        input_rows: 16,
        input_cols: 4,
        patch_rows: 4,
        patch_cols: 2,
        embed_dim: 8,
        num_attention_blocks: 2,
        head_hidden: 8,
        positional_encoding: true,
    }
}

fn setup(epochs: usize) -> (Vec<CsiSample>, ModelCheckpoint) {
    let mut sig = SignalConfig::default();
    sig.ofdm.num_subcarriers = 16;
    let data = generate_dataset(12, &GenerationRanges::default(), &sig, 21).unwrap();
    let refs: Vec<&CsiSample> = data.iter().collect();
    let hp = TrainParams { epochs, batch_size: 4, learning_rate: 1e-3, seed: 4, validation_fraction: 0.0 };
    let ckpt = train(&refs, &small_net(), &hp, RegionTag::Small).unwrap();
    (data, ckpt)
}

#[test]
fn checkpoint_json_round_trip_is_exact() {
    let (data, ckpt) = setup(3);
    let mut buf = Vec::new();
    ckpt.write_json(&mut buf).unwrap();
    let back = ModelCheckpoint::read_json(buf.as_slice()).unwrap();
    assert_eq!(back, ckpt);
    for s in &data {
        assert_eq!(back.predict(&s.matrix).unwrap(), ckpt.predict(&s.matrix).unwrap());
    }
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let (_, ckpt) = setup(0);
    let mut buf = Vec::new();
    ckpt.write_json(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let renamed = text.replace("\"head.w2\"", "\"head.w9\"");
    assert!(ModelCheckpoint::read_json(renamed.as_bytes()).is_err());
    let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 7");
    assert!(ModelCheckpoint::read_json(bumped.as_bytes()).is_err());
}

#[test]
fn single_sample_attention_equals_its_map() {
    let (data, ckpt) = setup(2);
    let exported = export_attention(&ckpt, [&data[0].matrix]).unwrap();
    let direct = ckpt.attention_maps(&data[0].matrix).unwrap();
    assert_eq!(direct.len(), 2);
    assert_eq!(exported, direct[0]);
}

#[test]
fn averaged_attention_is_row_stochastic() {
    let (data, ckpt) = setup(2);
    let n = small_net().num_tokens();
    let map = export_attention(&ckpt, data.iter().map(|s| &s.matrix)).unwrap();
    assert_eq!(map.shape(), (n, n));
    for r in 0..n {
        let sum: f64 = map.row(r).iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(map.row(r).iter().all(|&v| v >= 0.0));
    }
    // mean of maps equals the oracle average computed map by map
    let mut oracle = vec![0.0; n * n];
    for s in &data {
        let a = &ckpt.attention_maps(&s.matrix).unwrap()[0];
        for (o, v) in oracle.iter_mut().zip(a.as_slice()) {
            *o += v / data.len() as f64;
        }
    }
    for (a, b) in map.as_slice().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
    }

    let mut csv = Vec::new();
    write_attention_csv(&map, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), n + 1);
    assert!(lines[0].starts_with("query_token,key_0,"));
    assert_eq!(lines[1].split(',').count(), n + 1);
}

#[test]
fn attention_export_rejects_empty_input_and_wrong_shape() {
    let (_, ckpt) = setup(0);
    let none: [&CMatrix; 0] = [];
    assert!(export_attention(&ckpt, none).is_err());
    let wrong = CMatrix::zeros(8, 4);
    assert!(ckpt.predict(&wrong).is_err());
}
