use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::data::{forward_all, gather, Model, Normalizer, Samples};
use super::optim::OptimizerState;
use super::TrainError;
use crate::autodiff::{Tape, Tensor};
use crate::graph::{NetworkGraph, ParamKey};
use crate::synth::ProxySet;

/// Samples per tape. Batches are cut into chunks of this size that run in
/// parallel; chunk gradients are summed in chunk order so the result does not
/// depend on the thread count.
pub const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// L/min.
    pub train_rmse: f64,
    /// L/min.
    pub val_rmse: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the best validation epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub optimizer: OptimizerState,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub graph: NetworkGraph<f32>,
    pub norm: Normalizer,
    pub history: Vec<PretrainRecord>,
    pub best_accuracy: f64,
}

enum Targets<'a> {
    Regression(&'a [f32]),
    Classes(&'a [usize]),
}

type Grads = BTreeMap<ParamKey, Vec<f32>>;

/// Loss (mean over the batch) and summed gradients for one batch.
fn batch_gradients(
    graph: &NetworkGraph<f32>,
    inputs: &Tensor<f32>,
    targets: &Targets,
    idx: &[usize],
) -> Result<(f64, Grads), TrainError> {
    let share = |chunk: &[usize]| chunk.len() as f64 / idx.len() as f64;
    let parts: Vec<(f64, Vec<(ParamKey, Vec<f32>)>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut tape = Tape::new();
            let x = tape.constant(gather(inputs, chunk));
            let rec = graph.record(&mut tape, x, true)?;
            let loss = match targets {
                Targets::Regression(y) => {
                    let t: Vec<f32> = chunk.iter().map(|&i| y[i]).collect();
                    let t = tape.constant(Tensor::new(vec![chunk.len(), 1], t)?);
                    tape.mse(rec.output, t)?
                }
                Targets::Classes(y) => {
                    let labels: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                    tape.cross_entropy(rec.output, &labels)?
                }
            };
            let loss = tape.scale(loss, share(chunk));
            tape.backward(loss)?;
            let grads = rec
                .params
                .iter()
                .map(|(k, v)| (*k, tape.grad(*v).expect("params track gradients").to_vec()))
                .collect();
            Ok((tape.value(loss).item() as f64, grads))
        })
        .collect::<Result<_, TrainError>>()?;

    let mut loss = 0.0;
    let mut total: Grads = BTreeMap::new();
    for (l, grads) in parts {
        loss += l;
        for (k, g) in grads {
            match total.get_mut(&k) {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => {
                    total.insert(k, g);
                }
            }
        }
    }
    Ok((loss, total))
}

fn grad_norm(grads: &Grads) -> f64 {
    grads
        .values()
        .flat_map(|g| g.iter())
        .map(|&v| (v as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Runs one epoch over `order`; returns the mean batch loss weighted by size.
fn run_epoch(
    graph: &mut NetworkGraph<f32>,
    optimizer: &mut OptimizerState,
    inputs: &Tensor<f32>,
    targets: &Targets,
    order: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64, TrainError> {
    let mut weighted = 0.0;
    for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
        let (loss, grads) = batch_gradients(graph, inputs, targets, idx)?;
        let norm = grad_norm(&grads);
        if !loss.is_finite() || !norm.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: b,
                grad_norm: norm,
            });
        }
        optimizer.step(graph, &grads, cfg);
        weighted += loss * idx.len() as f64;
    }
    Ok(weighted / order.len() as f64)
}

fn shuffle_rng(cfg: &TrainConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    rng
}

fn check_samples(graph: &NetworkGraph<f32>, s: &Samples, what: &str) -> Result<(), TrainError> {
    if s.is_empty() {
        return Err(TrainError::Shape(format!("{what} split is empty")));
    }
    if s.channels() != graph.input_channels() || s.window_len() != graph.input_len() {
        return Err(TrainError::Shape(format!(
            "{what} windows are {} x {}, network expects {} x {}",
            s.channels(),
            s.window_len(),
            graph.input_channels(),
            graph.input_len()
        )));
    }
    if graph.output_features() != 1 {
        return Err(TrainError::Shape(format!(
            "regression needs one output, network has {}",
            graph.output_features()
        )));
    }
    Ok(())
}

fn rmse_in_units(pred_z: &[f32], targets: &[f32], norm: &Normalizer) -> f64 {
    let se: f64 = pred_z
        .iter()
        .zip(targets)
        .map(|(&z, &y)| (norm.decode_target(z) as f64 - y as f64).powi(2))
        .sum();
    (se / targets.len() as f64).sqrt()
}

fn fit_regression(
    graph: NetworkGraph<f32>,
    norm: Normalizer,
    train_set: &Samples,
    val_set: &Samples,
    cfg: &TrainConfig,
    max_epochs: usize,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_samples(&graph, train_set, "training")?;
    check_samples(&graph, val_set, "validation")?;
    let x_train = norm.apply_inputs(&train_set.inputs)?;
    let x_val = norm.apply_inputs(&val_set.inputs)?;
    let y_train: Vec<f32> = train_set.targets.iter().map(|&y| norm.encode_target(y)).collect();
    let targets = Targets::Regression(&y_train);

    let start = Instant::now();
    let mut rng = shuffle_rng(cfg, 1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut optimizer = OptimizerState::new(cfg.optimizer);
    let mut graph = graph;
    let mut best = (f64::INFINITY, 0usize, graph.clone());
    let mut history = Vec::new();
    for epoch in 1..=max_epochs {
        order.shuffle(&mut rng);
        let train_mse = run_epoch(&mut graph, &mut optimizer, &x_train, &targets, &order, cfg, epoch)?;
        let val_rmse = rmse_in_units(&forward_all(&graph, &x_val)?, &val_set.targets, &norm);
        if !val_rmse.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
                grad_norm: f64::NAN,
            });
        }
        history.push(EpochRecord {
            epoch,
            train_rmse: train_mse.sqrt() * norm.target_std as f64,
            val_rmse,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if val_rmse < best.0 {
            best = (val_rmse, epoch, graph.clone());
        } else if epoch - best.1 >= cfg.early_stop_patience {
            break;
        }
    }
    let (_, best_epoch, best_graph) = best;
    Ok(TrainOutcome {
        model: Model {
            graph: best_graph,
            norm,
        },
        history,
        optimizer,
        best_epoch,
    })
}

/// Minimizes MSE on the training split, early-stopping on validation RMSE and
/// returning the best weights. Normalization is fitted on `train_set`.
pub fn train(
    graph: NetworkGraph<f32>,
    train_set: &Samples,
    val_set: &Samples,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let norm = Normalizer::fit(train_set);
    fit_regression(graph, norm, train_set, val_set, cfg, cfg.max_epochs)
}

/// Continues training an existing model (typically a masked, rewired one)
/// for `finetune_epochs` under its original normalization. Masks and skip
/// patterns stay in force.
pub fn finetune(
    model: &Model,
    train_set: &Samples,
    val_set: &Samples,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if cfg.finetune_epochs == 0 {
        return Ok(TrainOutcome {
            model: model.clone(),
            history: Vec::new(),
            optimizer: OptimizerState::new(cfg.optimizer),
            best_epoch: 0,
        });
    }
    let cfg = TrainConfig {
        early_stop_patience: cfg.early_stop_patience.min(cfg.finetune_epochs),
        max_epochs: cfg.finetune_epochs,
        ..cfg.clone()
    };
    fit_regression(model.graph.clone(), model.norm.clone(), train_set, val_set, &cfg, cfg.max_epochs)
}

/// Class predictions (argmax of the logits).
pub fn classify(graph: &NetworkGraph<f32>, norm: &Normalizer, inputs: &Tensor<f32>) -> Result<Vec<usize>, TrainError> {
    let k = graph.output_features();
    let logits = forward_all(graph, &norm.apply_inputs(inputs)?)?;
    Ok(logits
        .chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect())
}

fn proxy_inputs(set: &ProxySet) -> Result<Tensor<f32>, TrainError> {
    let windows: Vec<_> = set.windows.iter().collect();
    Ok(Samples::from_windows(&windows)?.inputs)
}

/// Trains a classification copy of the network on the proxy task for up to
/// `pretrain_epochs`, keeping the weights with the best held-out accuracy.
pub fn pretrain_proxy(
    graph: NetworkGraph<f32>,
    train_set: &ProxySet,
    val_set: &ProxySet,
    cfg: &TrainConfig,
) -> Result<PretrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::Shape("proxy splits must be nonempty".into()));
    }
    if graph.output_features() != train_set.n_classes {
        return Err(TrainError::Shape(format!(
            "proxy task has {} classes, network has {} outputs",
            train_set.n_classes,
            graph.output_features()
        )));
    }
    let x_train = proxy_inputs(train_set)?;
    let x_val = proxy_inputs(val_set)?;
    if x_train.shape()[1..] != [graph.input_channels(), graph.input_len()] {
        return Err(TrainError::Shape(format!(
            "proxy windows are {:?}, network expects {} x {}",
            &x_train.shape()[1..],
            graph.input_channels(),
            graph.input_len()
        )));
    }
    let norm = Normalizer::fit_inputs(&x_train);
    let xn = norm.apply_inputs(&x_train)?;
    let targets = Targets::Classes(&train_set.labels);

    let mut rng = shuffle_rng(cfg, 2);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut optimizer = OptimizerState::new(cfg.optimizer);
    let mut graph = graph;
    let mut best = (-1.0, graph.clone());
    let mut history = Vec::new();
    for epoch in 1..=cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        let loss = run_epoch(&mut graph, &mut optimizer, &xn, &targets, &order, cfg, epoch)?;
        let pred = classify(&graph, &norm, &x_val)?;
        let hits = pred.iter().zip(&val_set.labels).filter(|(p, l)| p == l).count();
        let acc = hits as f64 / val_set.len() as f64;
        history.push(PretrainRecord {
            epoch,
            train_loss: loss,
            val_accuracy: acc,
        });
        if acc > best.0 {
            best = (acc, graph.clone());
        }
    }
    let (best_accuracy, graph) = best;
    Ok(PretrainOutcome {
        graph,
        norm,
        history,
        best_accuracy: best_accuracy.max(0.0),
    })
}

/// Copies every parameter outside the dense head from `pretrained` into
/// `target`, leaving the head freshly initialized. Returns the number of
/// layers transplanted.
pub fn transfer_head(pretrained: &NetworkGraph<f32>, target: &mut NetworkGraph<f32>) -> Result<usize, TrainError> {
    let blocks = target.blocks()?;
    let mut moved = 0;
    for b in blocks.iter().filter(|b| !b.is_head) {
        for id in b.first..=b.last {
            let Some(dst) = target.layer_params(id) else {
                continue;
            };
            let src = pretrained.layer_params(id).ok_or_else(|| {
                TrainError::Shape(format!("pretrained network has no parameters for layer {id}"))
            })?;
            if src.weight.shape() != dst.weight.shape() || src.bias.shape() != dst.bias.shape() {
                return Err(TrainError::Shape(format!(
                    "layer {id}: pretrained weight {:?} does not fit {:?}",
                    src.weight.shape(),
                    dst.weight.shape()
                )));
            }
            let src = src.clone();
            *target.layer_params_mut(id).expect("checked above") = src;
            moved += 1;
        }
    }
    Ok(moved)
}
