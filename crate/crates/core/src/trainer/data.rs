use rayon::prelude::*;

use super::TrainError;
use crate::autodiff::Tensor;
use crate::graph::NetworkGraph;
use crate::synth::SignalWindow;

/// Windows packed as a `[N, 2, L]` tensor (flow, heart rate) plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Tensor<f32>,
    pub targets: Vec<f32>,
    pub levels: Vec<u8>,
    pub subjects: Vec<u32>,
    pub window_ids: Vec<u32>,
}

impl Samples {
    pub fn from_windows(windows: &[&SignalWindow]) -> Result<Self, TrainError> {
        let len = windows.first().map_or(0, |w| w.len());
        let mut data = Vec::with_capacity(windows.len() * 2 * len);
        for w in windows {
            if w.resp_flow.len() != len || w.heart_series.len() != len {
                return Err(TrainError::Shape(format!(
                    "window {}/{} has channel lengths {}/{}, expected {len}",
                    w.subject_id,
                    w.window_id,
                    w.resp_flow.len(),
                    w.heart_series.len()
                )));
            }
            data.extend_from_slice(&w.resp_flow);
            data.extend_from_slice(&w.heart_series);
        }
        Ok(Samples {
            inputs: Tensor::new(vec![windows.len(), 2, len], data)?,
            targets: windows.iter().map(|w| w.mv_true).collect(),
            levels: windows.iter().map(|w| w.artifact_level).collect(),
            subjects: windows.iter().map(|w| w.subject_id).collect(),
            window_ids: windows.iter().map(|w| w.window_id).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn window_len(&self) -> usize {
        self.inputs.shape()[2]
    }
}

/// Copies the rows `idx` of a `[N, C, L]` tensor.
pub(crate) fn gather(inputs: &Tensor<f32>, idx: &[usize]) -> Tensor<f32> {
    let s = inputs.shape();
    let row = s[1] * s[2];
    let mut data = Vec::with_capacity(idx.len() * row);
    for &i in idx {
        data.extend_from_slice(&inputs.data()[i * row..(i + 1) * row]);
    }
    Tensor::new(vec![idx.len(), s[1], s[2]], data).expect("row size")
}

/// Per-channel input standardization and target standardization, fitted on
/// the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub input_mean: Vec<f32>,
    pub input_std: Vec<f32>,
    pub target_mean: f32,
    pub target_std: f32,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f32, f32) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean as f32, if std > 1e-12 { std as f32 } else { 1.0 })
}

impl Normalizer {
    pub fn fit(samples: &Samples) -> Self {
        let mut n = Self::fit_inputs(&samples.inputs);
        let (m, s) = mean_std(samples.targets.iter().map(|&v| v as f64));
        n.target_mean = m;
        n.target_std = s;
        n
    }

    /// Input statistics only; the target transform is left as identity.
    pub fn fit_inputs(inputs: &Tensor<f32>) -> Self {
        let s = inputs.shape();
        let (n, c, l) = (s[0], s[1], s[2]);
        let mut input_mean = Vec::with_capacity(c);
        let mut input_std = Vec::with_capacity(c);
        for ch in 0..c {
            let it = (0..n).flat_map(move |i| {
                inputs.data()[(i * c + ch) * l..(i * c + ch + 1) * l].iter().map(|&v| v as f64)
            });
            let (m, sd) = mean_std(it);
            input_mean.push(m);
            input_std.push(sd);
        }
        Normalizer {
            input_mean,
            input_std,
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    pub fn apply_inputs(&self, inputs: &Tensor<f32>) -> Result<Tensor<f32>, TrainError> {
        let s = inputs.shape();
        if s.len() != 3 || s[1] != self.input_mean.len() {
            return Err(TrainError::Shape(format!(
                "normalizer expects [N, {}, L], got {s:?}",
                self.input_mean.len()
            )));
        }
        let (c, l) = (s[1], s[2]);
        let data = inputs
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = (i / l) % c;
                (v - self.input_mean[ch]) / self.input_std[ch]
            })
            .collect();
        Ok(Tensor::new(s.to_vec(), data)?)
    }

    pub fn encode_target(&self, y: f32) -> f32 {
        (y - self.target_mean) / self.target_std
    }

    pub fn decode_target(&self, z: f32) -> f32 {
        z * self.target_std + self.target_mean
    }
}

/// A regression network together with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub graph: NetworkGraph<f32>,
    pub norm: Normalizer,
}

pub(crate) const EVAL_CHUNK: usize = 32;

/// Raw network outputs for already-normalized inputs, `[N, outputs]` flattened.
pub(crate) fn forward_all(graph: &NetworkGraph<f32>, inputs: &Tensor<f32>) -> Result<Vec<f32>, TrainError> {
    let n = inputs.shape()[0];
    let idx: Vec<usize> = (0..n).collect();
    let parts: Vec<Vec<f32>> = idx
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| Ok(graph.forward(&gather(inputs, chunk))?.into_data()))
        .collect::<Result<_, TrainError>>()?;
    Ok(parts.concat())
}

/// Predictions in L/min.
pub fn predict(model: &Model, samples: &Samples) -> Result<Vec<f32>, TrainError> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let x = model.norm.apply_inputs(&samples.inputs)?;
    let z = forward_all(&model.graph, &x)?;
    Ok(z.into_iter().map(|v| model.norm.decode_target(v)).collect())
}
