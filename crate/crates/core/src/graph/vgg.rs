use rand::Rng;

use super::network::NetworkGraph;
use super::spec::{LayerKind, LayerSpec};
use super::GraphError;
use crate::autodiff::Scalar;

/// 1-D VGG-16 layout: five conv blocks (2-2-3-3-3 convs, each followed by
/// relu), a max pool closing every block, then a three-layer dense head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VggConfig {
    pub input_channels: usize,
    pub input_len: usize,
    pub widths: [usize; 5],
    pub convs_per_block: [usize; 5],
    pub kernel: usize,
    pub pool: usize,
    /// Hidden units of the first two dense layers.
    pub hidden: [usize; 2],
    pub outputs: usize,
}

impl Default for VggConfig {
    /// Lands at 13.32M parameters for 2 x 1500 inputs.
    fn default() -> Self {
        VggConfig {
            input_channels: 2,
            input_len: 1500,
            widths: [64, 128, 256, 512, 512],
            convs_per_block: [2, 2, 3, 3, 3],
            kernel: 3,
            pool: 2,
            hidden: [352, 352],
            outputs: 1,
        }
    }
}

impl VggConfig {
    /// Narrow variant sized for single-core training runs.
    pub fn desk() -> Self {
        VggConfig {
            widths: [4, 4, 8, 8, 8],
            hidden: [32, 32],
            ..Self::default()
        }
    }

    pub fn with_outputs(mut self, outputs: usize) -> Self {
        self.outputs = outputs;
        self
    }

    pub fn layers(&self) -> Result<Vec<LayerSpec>, GraphError> {
        if self.kernel.is_multiple_of(2) {
            return Err(GraphError::Construction(format!(
                "kernel {} must be odd to keep 'same' padding",
                self.kernel
            )));
        }
        let mut layers = Vec::new();
        let mut push = |block: usize, kind: LayerKind| {
            let id = layers.len();
            layers.push(LayerSpec { id, block, kind });
        };
        let mut channels = self.input_channels;
        let mut len = self.input_len;
        for b in 0..5 {
            for _ in 0..self.convs_per_block[b] {
                push(
                    b + 1,
                    LayerKind::Conv1d {
                        in_channels: channels,
                        out_channels: self.widths[b],
                        kernel: self.kernel,
                        stride: 1,
                        padding: self.kernel / 2,
                    },
                );
                push(b + 1, LayerKind::Relu);
                channels = self.widths[b];
            }
            if len < self.pool || self.pool == 0 {
                return Err(GraphError::Construction(format!(
                    "block {} receives length {len}, too short for pooling by {}",
                    b + 1,
                    self.pool
                )));
            }
            push(
                b + 1,
                LayerKind::MaxPool {
                    kernel: self.pool,
                    stride: self.pool,
                },
            );
            len /= self.pool;
        }
        if len == 0 {
            return Err(GraphError::Construction("input too short for five pooling stages".into()));
        }
        let head = 6;
        push(head, LayerKind::Flatten);
        let mut features = channels * len;
        for &units in &self.hidden {
            push(
                head,
                LayerKind::Dense {
                    in_features: features,
                    units,
                },
            );
            push(head, LayerKind::Relu);
            features = units;
        }
        push(
            head,
            LayerKind::Dense {
                in_features: features,
                units: self.outputs,
            },
        );
        Ok(layers)
    }
}

/// Builds the unpruned regressor ("NeuralNetA").
pub fn build_neural_net_a<T: Scalar, R: Rng + ?Sized>(
    config: &VggConfig,
    rng: &mut R,
) -> Result<NetworkGraph<T>, GraphError> {
    NetworkGraph::new(config.input_channels, config.input_len, config.layers()?, rng)
}

/// Canonical 2-D VGG-16 for 224x224x3 inputs and 1000 classes.
pub fn reference_vgg16_2d() -> Vec<LayerSpec> {
    let widths = [64, 128, 256, 512, 512];
    let convs = [2, 2, 3, 3, 3];
    let mut layers = Vec::new();
    let mut push = |block: usize, kind: LayerKind| {
        let id = layers.len();
        layers.push(LayerSpec { id, block, kind });
    };
    let mut channels = 3;
    let mut side = 224;
    for b in 0..5 {
        for _ in 0..convs[b] {
            push(
                b + 1,
                LayerKind::Conv2dRef {
                    in_channels: channels,
                    out_channels: widths[b],
                    kernel: 3,
                },
            );
            push(b + 1, LayerKind::Relu);
            channels = widths[b];
        }
        push(b + 1, LayerKind::MaxPool { kernel: 2, stride: 2 });
        side /= 2;
    }
    push(6, LayerKind::Flatten);
    let mut features = channels * side * side;
    for units in [4096, 4096, 1000] {
        push(6, LayerKind::Dense { in_features: features, units });
        features = units;
    }
    layers
}

pub fn reference_vgg16_2d_count() -> usize {
    reference_vgg16_2d().iter().map(|l| l.param_count()).sum()
}
