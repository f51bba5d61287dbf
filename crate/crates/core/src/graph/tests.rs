use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Tensor;
use crate::pruning::PruneMask;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_batch(r: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f32> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn tiny_vgg() -> VggConfig {
    VggConfig {
        input_channels: 2,
        input_len: 64,
        widths: [3, 4, 4, 5, 5],
        hidden: [6, 6],
        ..VggConfig::default()
    }
}

fn bits(t: &Tensor<f32>) -> Vec<u32> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn default_net_a_lands_in_thirteen_million_band() {
    let g: NetworkGraph<f32> = build_neural_net_a(&VggConfig::default(), &mut rng(0)).unwrap();
    let n = g.param_count();
    assert!((13_000_000..=14_000_000).contains(&n), "{n}");
    let convs = g.layers().iter().filter(|l| matches!(l.kind, LayerKind::Conv1d { .. })).count();
    let dense = g.layers().iter().filter(|l| matches!(l.kind, LayerKind::Dense { .. })).count();
    assert_eq!((convs, dense), (13, 3));
    assert_eq!(g.conv_block_count(), 5);
}

#[test]
fn default_net_a_maps_window_to_scalar() {
    let g: NetworkGraph<f32> = build_neural_net_a(&VggConfig::default(), &mut rng(1)).unwrap();
    let x = random_batch(&mut rng(2), vec![1, 2, 1500]);
    let y = g.forward(&x).unwrap();
    assert_eq!(y.shape(), &[1, 1]);
}

#[test]
fn halving_widths_quarters_conv_parameters() {
    let conv_params = |cfg: &VggConfig| -> usize {
        cfg.layers()
            .unwrap()
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Conv1d { .. }))
            .map(|l| l.param_count())
            .sum()
    };
    let full = VggConfig::default();
    let half = VggConfig {
        widths: full.widths.map(|w| w / 2),
        ..full.clone()
    };
    let ratio = conv_params(&half) as f64 / conv_params(&full) as f64;
    assert!((ratio - 0.25).abs() <= 0.05, "{ratio}");
}

#[test]
fn reference_vgg16_count_is_exact() {
    assert_eq!(reference_vgg16_2d_count(), 138_357_544);
}

#[test]
fn dense_ten_to_five_has_55_params() {
    let l = LayerSpec {
        id: 0,
        block: 1,
        kind: LayerKind::Dense {
            in_features: 10,
            units: 5,
        },
    };
    assert_eq!(l.param_count(), 55);
}

#[test]
fn too_short_input_is_a_construction_error() {
    let cfg = VggConfig {
        input_len: 16,
        ..tiny_vgg()
    };
    assert!(matches!(
        build_neural_net_a::<f32, _>(&cfg, &mut rng(0)),
        Err(GraphError::Construction(_))
    ));
}

#[test]
fn param_count_matches_raw_storage() {
    let mut g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(3)).unwrap();
    g.add_skip_edges(&SkipPattern::DenseSkip, 0.5, SkipInit::Uniform(0.05), &mut rng(4))
        .unwrap();
    let raw: usize = g.params().values().map(|p| p.weight.data().len() + p.bias.data().len()).sum::<usize>()
        + g.skips().iter().map(|s| s.weight.data().len()).sum::<usize>();
    assert_eq!(g.param_count(), raw);
}

#[test]
fn masked_count_subtracts_zeros() {
    let mut g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(5)).unwrap();
    let p = g.layer_params(0).unwrap();
    let shape = p.weight.shape().to_vec();
    let n = p.weight.numel();
    let keep: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect();
    let zeros = keep.iter().filter(|k| !**k).count();
    g.set_mask(PruneMask::new(0, shape, keep)).unwrap();
    assert_eq!(g.effective_param_count(), g.param_count() - zeros);
}

#[test]
fn zero_input_zero_bias_gives_zero_output() {
    let g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(6)).unwrap();
    let y = g.forward(&Tensor::zeros(vec![2, 2, 64])).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn block_skip_on_five_blocks_adds_three_edges() {
    let mut g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(7)).unwrap();
    let ids = g
        .add_skip_edges(&SkipPattern::BlockSkip, 0.5, SkipInit::Uniform(0.05), &mut rng(8))
        .unwrap();
    assert_eq!(ids.len(), 3);
    let blocks = g.blocks().unwrap();
    for (n, e) in g.skips().iter().enumerate() {
        let i = n + 1;
        assert_eq!(e.src, blocks[i - 1].last);
        assert_eq!(e.dst, blocks[i + 1].first);
    }
    g.validate_dag().unwrap();
    assert_eq!(SkipPattern::DenseSkip.pairs(5).len(), 6);
}

#[test]
fn density_fixes_nonzero_count() {
    let layers = vec![
        LayerSpec {
            id: 0,
            block: 1,
            kind: LayerKind::Conv1d {
                in_channels: 1,
                out_channels: 64,
                kernel: 1,
                stride: 1,
                padding: 0,
            },
        },
        LayerSpec {
            id: 1,
            block: 1,
            kind: LayerKind::Conv1d {
                in_channels: 64,
                out_channels: 128,
                kernel: 1,
                stride: 1,
                padding: 0,
            },
        },
        LayerSpec {
            id: 2,
            block: 1,
            kind: LayerKind::Relu,
        },
    ];
    let mut g: NetworkGraph<f32> = NetworkGraph::new(1, 4, layers, &mut rng(9)).unwrap();
    let i = g.add_skip_edge(0, 2, 0.1, SkipInit::Uniform(0.05), &mut rng(10)).unwrap();
    assert_eq!(g.skips()[i].fan_area(), 8192);
    assert_eq!(g.skips()[i].nonzero_count(), 819);
    let nonzero_values = g.skips()[i].weight.data().iter().filter(|v| **v != 0.0).count();
    assert_eq!(nonzero_values, 819);
}

#[test]
fn zeroed_skip_edges_are_transparent() {
    let base: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(11)).unwrap();
    let x = random_batch(&mut rng(12), vec![3, 2, 64]);
    let before = base.forward(&x).unwrap();

    let mut g = base.clone();
    g.add_skip_edges(&SkipPattern::DenseSkip, 0.7, SkipInit::Uniform(0.5), &mut rng(13))
        .unwrap();
    assert_ne!(bits(&g.forward(&x).unwrap()), bits(&before));
    for e in g.skips_mut() {
        e.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    assert_eq!(bits(&g.forward(&x).unwrap()), bits(&before));

    let mut z = base.clone();
    z.add_skip_edges(&SkipPattern::BlockSkip, 0.3, SkipInit::Zero, &mut rng(14))
        .unwrap();
    assert_eq!(bits(&z.forward(&x).unwrap()), bits(&before));
}

#[test]
fn mask_in_forward_equals_premultiplied_weights() {
    let mut g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(15)).unwrap();
    let mut r = rng(16);
    let ids: Vec<usize> = g.params().keys().copied().collect();
    for id in ids {
        let w = &g.layer_params(id).unwrap().weight;
        let keep = (0..w.numel()).map(|_| r.gen_bool(0.6)).collect();
        g.set_mask(PruneMask::new(id, w.shape().to_vec(), keep)).unwrap();
    }
    let mut pre = g.clone();
    let masks: Vec<PruneMask> = pre.masks().values().cloned().collect();
    for m in &masks {
        m.apply(pre.layer_params_mut(m.layer_id).unwrap().weight.data_mut());
    }
    pre.clear_masks();
    let x = random_batch(&mut rng(17), vec![2, 2, 64]);
    assert_eq!(bits(&g.forward(&x).unwrap()), bits(&pre.forward(&x).unwrap()));
}

#[test]
fn cyclic_or_irreconcilable_edges_are_rejected() {
    let mut g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(18)).unwrap();
    let err = g
        .add_skip_edges(&SkipPattern::Pairs(vec![(3, 2)]), 0.5, SkipInit::Zero, &mut rng(0))
        .unwrap_err();
    assert!(matches!(err, GraphError::Cycle(_)));
    assert!(g
        .add_skip_edges(&SkipPattern::Pairs(vec![(2, 3)]), 0.5, SkipInit::Zero, &mut rng(0))
        .is_err());
    assert!(g.skips().is_empty());

    // block 1 output cannot feed the flattened head's dense layer
    let dense_id = g
        .layers()
        .iter()
        .find(|l| matches!(l.kind, LayerKind::Dense { .. }))
        .unwrap()
        .id;
    assert!(matches!(
        g.add_skip_edge(2, dense_id, 0.5, SkipInit::Zero, &mut rng(0)),
        Err(GraphError::MergeShape { .. })
    ));

    // hand-made backwards edge
    g.add_skip_edge(2, 10, 0.5, SkipInit::Zero, &mut rng(0)).unwrap();
    g.validate_dag().unwrap();
    let e = &mut g.skips_mut()[0];
    std::mem::swap(&mut e.src, &mut e.dst);
    assert!(matches!(g.validate_dag(), Err(GraphError::Cycle(_))));
    assert!(!is_acyclic(3, &[(0, 1), (1, 2), (2, 0)]));
    assert!(is_acyclic(3, &[(0, 1), (1, 2), (0, 2)]));
}

#[test]
fn arch_text_roundtrip() {
    let mut g: NetworkGraph<f32> = build_neural_net_a(&tiny_vgg(), &mut rng(19)).unwrap();
    g.add_skip_edges(&SkipPattern::BlockSkip, 0.25, SkipInit::Uniform(0.05), &mut rng(20))
        .unwrap();
    let text = g.arch().render();
    let parsed = ArchSpec::parse(&text).unwrap();
    assert_eq!(parsed, g.arch());
    let rebuilt: NetworkGraph<f32> = NetworkGraph::from_arch(&parsed, &mut rng(21)).unwrap();
    assert_eq!(rebuilt.arch(), g.arch());
    assert!(matches!(
        ArchSpec::parse("input channels=2 length=8\nconv1d block=1 in=2\n"),
        Err(GraphError::Parse { line: 2, .. })
    ));
}

/// Evaluates a single-sample DAG by explicit recursion over layer inputs.
fn recursive_eval(g: &NetworkGraph<f64>, x: &[f64], layer: isize) -> (usize, Vec<f64>) {
    if layer < 0 {
        return (g.input_len(), x.to_vec());
    }
    let id = layer as usize;
    let (mut len, mut input) = recursive_eval(g, x, layer - 1);
    for e in g.skips().iter().filter(|e| e.dst == id) {
        let (slen, src) = recursive_eval(g, x, e.src as isize);
        let sc = src.len() / slen;
        let dc = input.len() / len;
        let stride = slen / len;
        for o in 0..dc {
            for t in 0..len {
                let mut acc = 0.0;
                for c in 0..sc {
                    if e.pattern[o * sc + c] {
                        acc += e.weight.data()[o * sc + c] * src[c * slen + t * stride];
                    }
                }
                input[o * len + t] += acc;
            }
        }
    }
    let out = match g.layers()[id].kind {
        LayerKind::Conv1d {
            in_channels,
            out_channels,
            kernel,
            padding,
            ..
        } => {
            let p = g.layer_params(id).unwrap();
            let lo = len + 2 * padding - kernel + 1;
            let mut y = vec![0.0; out_channels * lo];
            for o in 0..out_channels {
                for t in 0..lo {
                    let mut acc = p.bias.data()[o];
                    for c in 0..in_channels {
                        for k in 0..kernel {
                            let pos = t as isize + k as isize - padding as isize;
                            if pos >= 0 && (pos as usize) < len {
                                acc += p.weight.data()[(o * in_channels + c) * kernel + k] * input[c * len + pos as usize];
                            }
                        }
                    }
                    y[o * lo + t] = acc;
                }
            }
            len = lo;
            y
        }
        LayerKind::Relu => input.iter().map(|v| v.max(0.0)).collect(),
        LayerKind::Flatten => {
            len = 1;
            input
        }
        LayerKind::Dense { in_features, units } => {
            let p = g.layer_params(id).unwrap();
            len = 1;
            (0..units)
                .map(|u| {
                    p.bias.data()[u]
                        + (0..in_features).map(|i| p.weight.data()[u * in_features + i] * input[i]).sum::<f64>()
                })
                .collect()
        }
        ref k => panic!("oracle does not handle {k:?}"),
    };
    (len, out)
}

#[test]
fn toy_graph_matches_recursive_oracle() {
    let conv = |id, cin, cout| LayerSpec {
        id,
        block: 1,
        kind: LayerKind::Conv1d {
            in_channels: cin,
            out_channels: cout,
            kernel: 3,
            stride: 1,
            padding: 1,
        },
    };
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let layers = vec![
            conv(0, 2, 3),
            LayerSpec {
                id: 1,
                block: 1,
                kind: LayerKind::Relu,
            },
            conv(2, 3, 4),
            LayerSpec {
                id: 3,
                block: 2,
                kind: LayerKind::Flatten,
            },
            LayerSpec {
                id: 4,
                block: 2,
                kind: LayerKind::Dense {
                    in_features: 4 * 7,
                    units: 2,
                },
            },
        ];
        let mut g: NetworkGraph<f64> = NetworkGraph::new(2, 7, layers, &mut r).unwrap();
        for p in g.layer_params_mut(0).unwrap().bias.data_mut() {
            *p = r.gen_range(-0.5..0.5);
        }
        g.add_skip_edge(0, 2, 0.6, SkipInit::Uniform(0.8), &mut r).unwrap();
        let x: Vec<f64> = (0..14).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y = g.forward(&Tensor::new(vec![1, 2, 7], x.clone()).unwrap()).unwrap();
        let (_, oracle) = recursive_eval(&g, &x, 4);
        for (a, b) in y.data().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
