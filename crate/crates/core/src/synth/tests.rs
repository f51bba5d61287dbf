use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn profile(vt: f64, rr: f64) -> SubjectProfile {
    SubjectProfile {
        subject_id: 0,
        sex: Sex::Female,
        age_years: 30,
        has_disorder: false,
        base_tidal_volume: vt,
        base_resp_rate: rr,
        base_heart_rate: 70.0,
        rsa_gain: 5.0,
        stress_level: 0.0,
    }
}

fn no_jitter() -> GeneratorParams {
    GeneratorParams {
        breath_jitter: 0.0,
        ..GeneratorParams::default()
    }
}

/// Trapezoidal integral of the positive flow, scaled to one minute.
fn trapezoid_mv(flow: &[f32], fs: f64) -> f64 {
    let pos: Vec<f64> = flow.iter().map(|&v| (v as f64).max(0.0)).collect();
    let area: f64 = pos.windows(2).map(|w| (w[0] + w[1]) / 2.0 / fs).sum();
    area * 60.0 / (flow.len() as f64 / fs)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn unjittered_breathing_gives_tidal_volume_times_rate() {
    for seed in 0..5 {
        let w = synth_breath_waveform(&profile(0.5, 12.0), 60.0, 25.0, &no_jitter(), &mut rng(seed)).unwrap();
        assert!((w.mv_true - 6.0).abs() < 1e-9, "{}", w.mv_true);
        assert_eq!(w.resp_flow.len(), 1500);
    }
}

#[test]
fn zero_amplitude_breathing() {
    let w = synth_breath_waveform(&profile(0.0, 12.0), 60.0, 25.0, &GeneratorParams::default(), &mut rng(0)).unwrap();
    assert!(w.resp_flow.iter().all(|&v| v == 0.0));
    assert_eq!(w.mv_true, 0.0);
}

#[test]
fn bad_breathing_inputs_are_rejected() {
    let g = GeneratorParams::default();
    for p in [profile(-0.1, 12.0), profile(0.5, 0.0), profile(f64::NAN, 12.0)] {
        assert!(matches!(
            synth_breath_waveform(&p, 60.0, 25.0, &g, &mut rng(0)),
            Err(SynthError::InvalidInput(_))
        ));
    }
    // 2 Hz sampling cannot resolve 40 breaths/min
    assert!(synth_breath_waveform(&profile(0.5, 40.0), 60.0, 2.0, &g, &mut rng(0)).is_err());
    // shorter than one breath
    assert!(synth_breath_waveform(&profile(0.5, 6.0), 5.0, 25.0, &g, &mut rng(0)).is_err());
}

#[test]
fn label_matches_integrated_flow() {
    let g = GeneratorParams::default();
    let mut r = rng(1);
    for _ in 0..300 {
        let p = profile(r.gen_range(0.2..1.2), r.gen_range(6.0..35.0));
        let w = synth_breath_waveform(&p, 60.0, 25.0, &g, &mut r).unwrap();
        let oracle = trapezoid_mv(&w.resp_flow, 25.0);
        assert!((oracle - w.mv_true).abs() / w.mv_true < 0.02, "{oracle} vs {}", w.mv_true);
    }
}

#[test]
fn heart_series_without_modulation_is_constant() {
    let mut p = profile(0.5, 12.0);
    p.rsa_gain = 0.0;
    let g = GeneratorParams::default();
    let w = synth_breath_waveform(&p, 60.0, 25.0, &g, &mut rng(2)).unwrap();
    let h = synth_heart_series(&p, &w.resp_flow, 25.0, &g, &mut rng(3)).unwrap();
    assert!(h.iter().all(|&v| v == 70.0));
    assert!(synth_heart_series(&p, &[], 25.0, &g, &mut rng(3)).is_err());
}

#[test]
fn stress_raises_mean_heart_rate() {
    let g = GeneratorParams::default();
    let calm = profile(0.5, 12.0);
    let tense = SubjectProfile {
        stress_level: 1.0,
        ..calm.clone()
    };
    let w = synth_breath_waveform(&calm, 60.0, 25.0, &g, &mut rng(4)).unwrap();
    let mean = |h: Vec<f32>| h.iter().map(|&v| v as f64).sum::<f64>() / h.len() as f64;
    let a = mean(synth_heart_series(&calm, &w.resp_flow, 25.0, &g, &mut rng(5)).unwrap());
    let b = mean(synth_heart_series(&tense, &w.resp_flow, 25.0, &g, &mut rng(5)).unwrap());
    assert!(b > a);
}

fn sdnn_mv_correlation(coupling: f64) -> f64 {
    let g = GeneratorParams {
        hrv_coupling: coupling,
        ..GeneratorParams::default()
    };
    let mut r = rng(6);
    let (mut sd, mut mv) = (Vec::new(), Vec::new());
    for _ in 0..50 {
        let mut p = profile(0.5, 14.0);
        p.rsa_gain = r.gen_range(4.5..5.5);
        // the window-to-window breathing drift of the cohort generator
        p.base_tidal_volume *= (r.gen_range(-0.6f64..0.6)).exp();
        let w = synth_breath_waveform(&p, 60.0, 25.0, &g, &mut r).unwrap();
        let h = synth_heart_series(&p, &w.resp_flow, 25.0, &g, &mut r).unwrap();
        let mean = h.iter().map(|&v| v as f64).sum::<f64>() / h.len() as f64;
        let var = h.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (h.len() - 1) as f64;
        sd.push(var.sqrt());
        mv.push(w.mv_true);
    }
    spearman(&sd, &mv)
}

#[test]
fn sdnn_follows_configured_coupling_sign() {
    assert!(sdnn_mv_correlation(1.0) > 0.5);
    assert!(sdnn_mv_correlation(-1.0) < -0.5);
}

#[test]
fn sdnn_helper() {
    assert_eq!(sdnn(&[1.0, 1.0, 1.0]), 0.0);
    assert!((sdnn(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-12);
}

fn clean_window(seed: u64) -> SignalWindow {
    let g = GeneratorParams::default();
    let p = profile(0.5, 12.0);
    let w = synth_breath_waveform(&p, 60.0, 25.0, &g, &mut rng(seed)).unwrap();
    let h = synth_heart_series(&p, &w.resp_flow, 25.0, &g, &mut rng(seed + 1)).unwrap();
    SignalWindow {
        subject_id: 1,
        window_id: 2,
        sex: Sex::Male,
        age_years: 40,
        resp_flow: w.resp_flow,
        heart_series: h,
        artifact_level: 0,
        mv_true: w.mv_true as f32,
    }
}

fn deviation(a: &[f32], b: &[f32]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| *x as f64 - *y as f64).collect()
}

#[test]
fn level_zero_is_identity() {
    let w = clean_window(7);
    let out = inject_artifacts(&w, 0, 25.0, &ArtifactParams::default(), &mut rng(8)).unwrap();
    assert_eq!(out, w);
}

#[test]
fn unknown_level_is_rejected() {
    let w = clean_window(7);
    assert!(inject_artifacts(&w, 4, 25.0, &ArtifactParams::default(), &mut rng(8)).is_err());
}

#[test]
fn distortion_grows_with_level_and_labels_stay() {
    let w = clean_window(9);
    let a = ArtifactParams::default();
    let mut prev = 0.0;
    for level in 1..=3 {
        let out = inject_artifacts(&w, level, 25.0, &a, &mut rng(10)).unwrap();
        assert_eq!(out.mv_true, w.mv_true);
        assert_eq!(out.artifact_level, level);
        let d = rms(&deviation(&out.resp_flow, &w.resp_flow));
        assert!(d > prev);
        prev = d;
    }
}

#[test]
fn level_two_noise_rms_matches_table() {
    let a = ArtifactParams::default();
    let zero = SignalWindow {
        resp_flow: vec![0.0; 1500],
        heart_series: vec![0.0; 1500],
        ..clean_window(11)
    };
    for seed in 0..10 {
        let out = inject_artifacts(&zero, 2, 25.0, &a, &mut rng(seed)).unwrap();
        let r: Vec<f64> = out.resp_flow.iter().map(|&v| v as f64).collect();
        let h: Vec<f64> = out.heart_series.iter().map(|&v| v as f64).collect();
        assert!((rms(&r) / a.resp_rms[2] - 1.0).abs() < 0.05);
        assert!((rms(&h) / a.heart_rms[2] - 1.0).abs() < 0.05);
    }
}

fn small_manifest(seed: u64) -> DatasetManifest {
    DatasetManifest {
        n_subjects: 6,
        n_female: 4,
        n_male: 2,
        windows_per_subject: 5,
        rng_seed: seed,
        ..DatasetManifest::default()
    }
}

#[test]
fn default_cohort_shape() {
    // short, coarsely sampled windows keep the 41,200-window cohort cheap
    let m = DatasetManifest {
        fs_hz: 5.0,
        window_seconds: 30.0,
        ..DatasetManifest::default()
    };
    let d = build_dataset(&m).unwrap();
    assert_eq!(d.profiles.len(), 103);
    assert_eq!(d.profiles.iter().filter(|p| p.sex == Sex::Female).count(), 53);
    assert_eq!(d.profiles.iter().filter(|p| p.sex == Sex::Male).count(), 50);
    assert_eq!(d.windows.len(), 41_200);
    assert!(d.profiles.iter().any(|p| (12..=20).contains(&p.age_years)));
    for s in 0..103u32 {
        assert_eq!(d.windows.iter().filter(|w| w.subject_id == s).count(), 400);
    }
    for w in &d.windows {
        assert_eq!(w.resp_flow.len(), 150);
        assert_eq!(w.heart_series.len(), 150);
        assert!(w.mv_true > 0.0);
    }
}

#[test]
fn dataset_is_deterministic() {
    let a = build_dataset(&small_manifest(3)).unwrap();
    let b = build_dataset(&small_manifest(3)).unwrap();
    assert_eq!(encode_dataset(25.0, &a.windows).unwrap(), encode_dataset(25.0, &b.windows).unwrap());
    let c = build_dataset(&small_manifest(4)).unwrap();
    assert_ne!(a.windows, c.windows);
}

#[test]
fn dataset_windows_keep_the_label_consistent() {
    let d = build_dataset(&small_manifest(5)).unwrap();
    for w in d.windows.iter().filter(|w| w.artifact_level == 0) {
        let oracle = trapezoid_mv(&w.resp_flow, 25.0);
        assert!((oracle - w.mv_true as f64).abs() / (w.mv_true as f64) < 0.02);
    }
}

#[test]
fn splits_are_subject_disjoint() {
    let m = DatasetManifest::desk(7);
    let ids: Vec<u32> = (0..m.n_subjects as u32).collect();
    let s = split_subjects(&ids, m.split, 7).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (14, 3, 3));
    let mut all: Vec<u32> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, ids);
    assert!(split_subjects(&ids, [0.5, 0.2, 0.2], 7).is_err());
}

#[test]
fn manifest_validation() {
    let mut m = DatasetManifest::default();
    m.n_male = 49;
    assert!(matches!(build_dataset(&m), Err(SynthError::InvalidInput(_))));
    let mut m = DatasetManifest::default();
    m.split = [0.7, 0.2, 0.2];
    assert!(build_dataset(&m).is_err());
}

#[test]
fn manifest_kv_roundtrip() {
    let mut m = DatasetManifest::desk(99);
    m.generator.artifacts.resp_rms = [0.0, 0.05, 0.15, 0.3];
    m.window_seconds = 30.5;
    assert_eq!(DatasetManifest::from_kv(&m.to_kv()).unwrap(), m);
    assert!(DatasetManifest::from_kv("bogus=1\n").is_err());
}

#[test]
fn file_roundtrip_is_exact() {
    let d = build_dataset(&small_manifest(8)).unwrap();
    let bytes = encode_dataset(25.0, &d.windows).unwrap();
    let f = decode_dataset(&bytes).unwrap();
    assert_eq!(f.windows, d.windows);
    assert_eq!(f.window_len, 1500);
    assert_eq!(f.fs_hz, 25.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.vntd");
    export_dataset(&path, 25.0, &d.windows).unwrap();
    assert_eq!(import_dataset(&path).unwrap(), f);
    assert_eq!(manifest_path(&path), dir.path().join("d.vntd.manifest"));
}

#[test]
fn truncation_names_the_offset() {
    let d = build_dataset(&small_manifest(9)).unwrap();
    let bytes = encode_dataset(25.0, &d.windows).unwrap();
    let rec = (bytes.len() - HEADER_LEN - 4) / d.windows.len();
    let cut = HEADER_LEN + 2 * rec + 100;
    match decode_dataset(&bytes[..cut]) {
        Err(SynthError::Truncated { record, offset, len, .. }) => {
            assert_eq!(record, 2);
            assert_eq!(offset, HEADER_LEN + 2 * rec);
            assert_eq!(len, cut);
        }
        other => panic!("expected truncation, got {other:?}"),
    }
}

#[test]
fn altered_sample_rate_fails_the_checksum() {
    let d = build_dataset(&small_manifest(10)).unwrap();
    let mut bytes = encode_dataset(25.0, &d.windows).unwrap();
    bytes[10] ^= 0x01; // fs_hz field
    assert!(matches!(decode_dataset(&bytes), Err(SynthError::Checksum { .. })));
    let mut bad_magic = encode_dataset(25.0, &d.windows).unwrap();
    bad_magic[0] = b'X';
    assert!(matches!(decode_dataset(&bad_magic), Err(SynthError::MalformedHeader(_))));
}

#[test]
fn every_single_byte_flip_is_detected() {
    let mut m = small_manifest(11);
    m.n_subjects = 1;
    m.n_female = 1;
    m.n_male = 0;
    m.windows_per_subject = 1;
    m.window_seconds = 15.0;
    m.fs_hz = 5.0;
    let d = build_dataset(&m).unwrap();
    let bytes = encode_dataset(5.0, &d.windows).unwrap();
    for i in 0..bytes.len() {
        let mut b = bytes.clone();
        b[i] ^= 0x20;
        assert!(decode_dataset(&b).is_err(), "flip at {i} went unnoticed");
    }
}

#[test]
fn proxy_task_shape() {
    let g = GeneratorParams::default();
    let p = generate_proxy(80, 60.0, 25.0, &g, 12).unwrap();
    assert_eq!(p.len(), 80);
    assert!(p.labels.iter().all(|&l| l < PROXY_CLASSES));
    for c in 0..PROXY_CLASSES {
        assert!(p.labels.iter().filter(|&&l| l == c).count() >= 10);
    }
    let (train, hold) = p.split(0.25);
    assert_eq!((train.len(), hold.len()), (60, 20));
    assert_eq!(generate_proxy(80, 60.0, 25.0, &g, 12).unwrap(), p);
}
