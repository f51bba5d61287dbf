use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{build_neural_net_a, NetworkGraph, ParamKey, SkipInit, SkipPattern, VggConfig};
use crate::pruning::{make_neural_net_b, PruneConfig, PruneScope};
use crate::synth::{Sex, SignalWindow};

const LEN: usize = 64;

fn tiny() -> VggConfig {
    VggConfig {
        input_len: LEN,
        widths: [2, 2, 3, 3, 3],
        hidden: [6, 6],
        ..VggConfig::default()
    }
}

fn net(seed: u64) -> NetworkGraph<f32> {
    build_neural_net_a(&tiny(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn windows(n: usize, seed: u64, label: impl Fn(&[f32]) -> f32) -> Vec<SignalWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let amp: f32 = rng.gen_range(0.2..1.0);
            let resp_flow: Vec<f32> = (0..LEN).map(|t| amp * (t as f32 * 0.4).sin() + rng.gen_range(-0.05..0.05)).collect();
            let heart_series: Vec<f32> = (0..LEN).map(|_| 70.0 + rng.gen_range(-2.0..2.0)).collect();
            let mv_true = label(&resp_flow);
            SignalWindow {
                subject_id: i as u32 / 10,
                window_id: i as u32,
                sex: Sex::Female,
                age_years: 30,
                resp_flow,
                heart_series,
                artifact_level: (i % 4) as u8,
                mv_true,
            }
        })
        .collect()
}

fn samples(w: &[SignalWindow]) -> Samples {
    Samples::from_windows(&w.iter().collect::<Vec<_>>()).unwrap()
}

fn amp_label(x: &[f32]) -> f32 {
    4.0 + 6.0 * x.iter().map(|v| v.abs()).sum::<f32>() / x.len() as f32
}

fn quick_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        max_epochs: 3,
        early_stop_patience: 3,
        finetune_epochs: 2,
        pretrain_epochs: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn constant_label_is_learned_within_one_percent() {
    let w = windows(40, 1, |_| 7.5);
    let s = samples(&w);
    // 40 samples in batches of 4 is 10 steps per epoch, 200 steps in total.
    let cfg = TrainConfig {
        batch_size: 4,
        max_epochs: 20,
        early_stop_patience: 20,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let out = train(net(0), &s, &s, &cfg).unwrap();
    for p in predict(&out.model, &s).unwrap() {
        assert!((p - 7.5).abs() < 0.075, "prediction {p}");
    }
}

#[test]
fn same_seed_gives_identical_history_and_weights() {
    let w = windows(48, 2, amp_label);
    let (tr, va) = (samples(&w[..32]), samples(&w[32..]));
    let a = train(net(3), &tr, &va, &quick_cfg()).unwrap();
    let b = train(net(3), &tr, &va, &quick_cfg()).unwrap();
    let cols = |o: &TrainOutcome| o.history.iter().map(|h| (h.epoch, h.train_rmse, h.val_rmse)).collect::<Vec<_>>();
    assert_eq!(cols(&a), cols(&b));
    assert_eq!(a.model, b.model);
    assert_eq!(a.optimizer, b.optimizer);

    let c = train(net(3), &tr, &va, &TrainConfig { seed: 9, ..quick_cfg() }).unwrap();
    assert_ne!(cols(&a), cols(&c));
}

#[test]
fn training_reduces_error_with_both_optimizers() {
    let w = windows(64, 4, amp_label);
    let (tr, va) = (samples(&w[..48]), samples(&w[48..]));
    for optimizer in [OptimizerKind::Adam, OptimizerKind::SgdMomentum] {
        let lr = if optimizer == OptimizerKind::Adam { 3e-3 } else { 1e-2 };
        let cfg = TrainConfig {
            optimizer,
            learning_rate: lr,
            max_epochs: 12,
            early_stop_patience: 12,
            ..quick_cfg()
        };
        let out = train(net(5), &tr, &va, &cfg).unwrap();
        let first = out.history.first().unwrap().train_rmse;
        let last = out.history.last().unwrap().train_rmse;
        assert!(last < first, "{optimizer:?}: {first} -> {last}");
        assert_eq!(out.optimizer.kind(), optimizer);
    }
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let w = windows(48, 6, amp_label);
    let (tr, va) = (samples(&w[..32]), samples(&w[32..]));
    let cfg = TrainConfig {
        max_epochs: 30,
        early_stop_patience: 2,
        learning_rate: 5e-2,
        ..quick_cfg()
    };
    let out = train(net(7), &tr, &va, &cfg).unwrap();
    let best = out
        .history
        .iter()
        .min_by(|a, b| a.val_rmse.total_cmp(&b.val_rmse))
        .unwrap();
    assert_eq!(best.epoch, out.best_epoch);
    let last = out.history.last().unwrap().epoch;
    assert!(last == cfg.max_epochs || last - out.best_epoch == cfg.early_stop_patience);
    let p = predict(&out.model, &va).unwrap();
    let rmse = (p.iter().zip(&va.targets).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>() / va.len() as f64).sqrt();
    assert!((rmse - best.val_rmse).abs() < 1e-9);
}

#[test]
fn nan_target_aborts_with_location() {
    let mut w = windows(16, 8, amp_label);
    w[3].mv_true = f32::NAN;
    let s = samples(&w);
    match train(net(0), &s, &s, &quick_cfg()) {
        Err(TrainError::NonFinite { epoch, batch, .. }) => assert_eq!((epoch, batch), (1, 0)),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    let bad = [
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { max_epochs: 0, ..TrainConfig::default() },
        TrainConfig { early_stop_patience: 0, ..TrainConfig::default() },
        TrainConfig { early_stop_patience: 51, ..TrainConfig::default() },
        TrainConfig { momentum: 1.0, ..TrainConfig::default() },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(TrainError::Config(_))), "{c:?}");
    }
    assert_eq!(OptimizerKind::parse("adam"), Some(OptimizerKind::Adam));
    assert_eq!(OptimizerKind::parse("sgd-momentum"), Some(OptimizerKind::SgdMomentum));
    assert_eq!(OptimizerKind::parse("sgd"), None);
}

#[test]
fn shape_mismatch_is_rejected() {
    let w = windows(8, 9, amp_label);
    let s = samples(&w);
    let other = build_neural_net_a::<f32, _>(
        &VggConfig { input_len: 96, ..tiny() },
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert!(matches!(train(other, &s, &s, &quick_cfg()), Err(TrainError::Shape(_))));
    let mut ragged = w.clone();
    ragged[2].heart_series.pop();
    assert!(Samples::from_windows(&ragged.iter().collect::<Vec<_>>()).is_err());
}

fn pruned_model() -> (Model, Samples) {
    let w = windows(32, 10, amp_label);
    let s = samples(&w);
    let out = train(net(11), &s, &s, &quick_cfg()).unwrap();
    let pc = PruneConfig {
        sparsity: 0.6,
        scope: PruneScope::Global,
        pattern: SkipPattern::BlockSkip,
        density: 0.5,
        skip_init: SkipInit::Uniform(0.05),
    };
    let (b, _) = make_neural_net_b(&out.model.graph, &pc, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    (
        Model {
            graph: b,
            norm: out.model.norm,
        },
        s,
    )
}

fn zero_positions(g: &NetworkGraph<f32>) -> Vec<(ParamKey, usize)> {
    let mut out = Vec::new();
    for key in g.param_keys() {
        if let Some(keep) = g.keep_pattern(key) {
            out.extend(keep.iter().enumerate().filter(|(_, k)| !**k).map(|(i, _)| (key, i)));
        }
    }
    out
}

#[test]
fn finetuning_never_revives_masked_weights() {
    let (model, s) = pruned_model();
    let masked = zero_positions(&model.graph);
    assert!(!masked.is_empty());
    // 32 samples in batches of 8 for 5 epochs is 20 optimizer steps.
    let cfg = TrainConfig {
        finetune_epochs: 5,
        learning_rate: 1e-2,
        ..quick_cfg()
    };
    let out = finetune(&model, &s, &s, &cfg).unwrap();
    assert_ne!(out.model.graph, model.graph);
    for (key, i) in masked {
        assert_eq!(out.model.graph.param(key).unwrap().data()[i], 0.0, "{key:?}[{i}]");
    }
    let unchanged = finetune(&model, &s, &s, &TrainConfig { finetune_epochs: 0, ..cfg }).unwrap();
    assert_eq!(unchanged.model, model);
}

fn checkpoint_fixture() -> Checkpoint {
    let (model, s) = pruned_model();
    let out = finetune(&model, &s, &s, &quick_cfg()).unwrap();
    Checkpoint {
        graph: out.model.graph,
        norm: Some(out.model.norm),
        optimizer: Some(out.optimizer),
        epoch: out.history.len(),
        history: out.history,
    }
}

#[test]
fn checkpoint_roundtrip_is_byte_and_forward_exact() {
    let ck = checkpoint_fixture();
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.vntc");
    let p2 = dir.path().join("b.vntc");
    save_checkpoint(&ck, &p1).unwrap();
    let back = load_checkpoint(&p1, LoadMode::Full).unwrap();
    save_checkpoint(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(back, ck);

    let x = samples(&windows(5, 12, amp_label)).inputs;
    let y0 = ck.graph.forward(&x).unwrap();
    let y1 = back.graph.forward(&x).unwrap();
    let bits = |t: &crate::autodiff::Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&y0), bits(&y1));
}

#[test]
fn checkpoint_sgd_state_roundtrips() {
    let w = windows(16, 13, amp_label);
    let s = samples(&w);
    let cfg = TrainConfig {
        optimizer: OptimizerKind::SgdMomentum,
        learning_rate: 1e-2,
        ..quick_cfg()
    };
    let out = train(net(2), &s, &s, &cfg).unwrap();
    let ck = Checkpoint {
        graph: out.model.graph,
        norm: Some(out.model.norm),
        optimizer: Some(out.optimizer),
        epoch: 3,
        history: out.history,
    };
    let back = decode_checkpoint(&encode_checkpoint(&ck), LoadMode::Full).unwrap();
    assert_eq!(back, ck);
}

#[test]
fn checkpoint_corruption_is_classified() {
    let bytes = encode_checkpoint(&checkpoint_fixture());

    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x10;
    assert!(matches!(decode_checkpoint(&flipped, LoadMode::Full), Err(TrainError::Checksum { .. })));

    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(decode_checkpoint(&version, LoadMode::Full), Err(TrainError::Version(9))));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(decode_checkpoint(&magic, LoadMode::Full), Err(TrainError::BadMagic)));

    assert!(decode_checkpoint(&bytes[..bytes.len() - 3], LoadMode::Full).is_err());
    assert!(decode_checkpoint(&[], LoadMode::Full).is_err());
}

#[test]
fn eval_only_load_drops_optimizer_but_keeps_history() {
    let ck = checkpoint_fixture();
    assert!(ck.optimizer.is_some() && !ck.history.is_empty());
    let back = decode_checkpoint(&encode_checkpoint(&ck), LoadMode::EvalOnly).unwrap();
    assert_eq!(back.optimizer, None);
    assert_eq!(back.history, ck.history);
    assert_eq!(back.graph, ck.graph);
    assert_eq!(back.norm, ck.norm);
}

#[test]
fn transfer_copies_conv_layers_and_leaves_head_fresh() {
    let proxy = build_neural_net_a::<f32, _>(&tiny().with_outputs(4), &mut ChaCha8Rng::seed_from_u64(20)).unwrap();
    let fresh = net(21);
    let mut target = fresh.clone();
    let moved = transfer_head(&proxy, &mut target).unwrap();
    assert_eq!(moved, 13);
    for b in target.blocks().unwrap() {
        for id in b.first..=b.last {
            let Some(p) = target.layer_params(id) else { continue };
            let expected = if b.is_head { fresh.layer_params(id) } else { proxy.layer_params(id) };
            assert_eq!(Some(p), expected, "layer {id}");
        }
    }

    let wider = build_neural_net_a::<f32, _>(
        &VggConfig { widths: [3, 2, 3, 3, 3], ..tiny() },
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert!(matches!(transfer_head(&wider, &mut target), Err(TrainError::Shape(_))));
}

#[test]
fn pretrain_rejects_class_count_mismatch() {
    let set = crate::synth::generate_proxy(8, LEN as f64 / 4.0, 4.0, &Default::default(), 1).unwrap();
    let (tr, va) = set.split(0.5);
    assert!(matches!(pretrain_proxy(net(0), &tr, &va, &quick_cfg()), Err(TrainError::Shape(_))));
    let cls = build_neural_net_a::<f32, _>(&tiny().with_outputs(4), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let out = pretrain_proxy(cls, &tr, &va, &quick_cfg()).unwrap();
    assert_eq!(out.history.len(), 2);
    assert!((0.0..=1.0).contains(&out.best_accuracy));
}
