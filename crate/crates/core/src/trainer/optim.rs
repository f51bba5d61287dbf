use std::collections::BTreeMap;

use super::config::{OptimizerKind, TrainConfig};
use crate::graph::{NetworkGraph, ParamKey};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Per-parameter optimizer buffers.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Adam {
        step: u64,
        m: BTreeMap<ParamKey, Vec<f32>>,
        v: BTreeMap<ParamKey, Vec<f32>>,
    },
    Sgd {
        velocity: BTreeMap<ParamKey, Vec<f32>>,
    },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Adam => OptimizerState::Adam {
                step: 0,
                m: BTreeMap::new(),
                v: BTreeMap::new(),
            },
            OptimizerKind::SgdMomentum => OptimizerState::Sgd {
                velocity: BTreeMap::new(),
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerState::Adam { .. } => OptimizerKind::Adam,
            OptimizerState::Sgd { .. } => OptimizerKind::SgdMomentum,
        }
    }

    /// One update from summed gradients. Positions outside a parameter's keep
    /// pattern are forced back to zero afterwards.
    pub(crate) fn step(&mut self, graph: &mut NetworkGraph<f32>, grads: &BTreeMap<ParamKey, Vec<f32>>, cfg: &TrainConfig) {
        let lr = cfg.learning_rate;
        match self {
            OptimizerState::Adam { step, m, v } => {
                *step += 1;
                let c1 = 1.0 - BETA1.powi(*step as i32);
                let c2 = 1.0 - BETA2.powi(*step as i32);
                for (key, g) in grads {
                    let m = m.entry(*key).or_insert_with(|| vec![0.0; g.len()]);
                    let v = v.entry(*key).or_insert_with(|| vec![0.0; g.len()]);
                    let w = graph.param_mut(*key).expect("gradient for a known parameter").data_mut();
                    for i in 0..g.len() {
                        let gi = g[i] as f64;
                        let mi = BETA1 * m[i] as f64 + (1.0 - BETA1) * gi;
                        let vi = BETA2 * v[i] as f64 + (1.0 - BETA2) * gi * gi;
                        m[i] = mi as f32;
                        v[i] = vi as f32;
                        let update = lr * (mi / c1) / ((vi / c2).sqrt() + EPS);
                        w[i] = (w[i] as f64 - update) as f32;
                    }
                }
            }
            OptimizerState::Sgd { velocity } => {
                for (key, g) in grads {
                    let vel = velocity.entry(*key).or_insert_with(|| vec![0.0; g.len()]);
                    let w = graph.param_mut(*key).expect("gradient for a known parameter").data_mut();
                    for i in 0..g.len() {
                        let vi = cfg.momentum * vel[i] as f64 + g[i] as f64;
                        vel[i] = vi as f32;
                        w[i] = (w[i] as f64 - lr * vi) as f32;
                    }
                }
            }
        }
        enforce_patterns(graph);
    }
}

pub(crate) fn enforce_patterns(graph: &mut NetworkGraph<f32>) {
    for key in graph.param_keys() {
        let Some(keep) = graph.keep_pattern(key).map(|k| k.to_vec()) else {
            continue;
        };
        let w = graph.param_mut(key).expect("listed key").data_mut();
        for (x, k) in w.iter_mut().zip(keep) {
            if !k {
                *x = 0.0;
            }
        }
    }
}
