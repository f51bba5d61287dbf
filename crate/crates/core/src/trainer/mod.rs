//! Optimization loops (proxy pretraining, regression training, masked
//! fine-tuning) and the binary checkpoint format.

mod checkpoint;
mod config;
mod data;
mod fit;
mod optim;

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::graph::GraphError;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, LoadMode};
pub use config::{OptimizerKind, TrainConfig};
pub use data::{predict, Model, Normalizer, Samples};
pub use fit::{
    classify, finetune, pretrain_proxy, train, transfer_head, EpochRecord, PretrainOutcome, PretrainRecord,
    TrainOutcome, CHUNK,
};
pub use optim::OptimizerState;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("data does not fit the network: {0}")]
    Shape(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (gradient norm {grad_norm})")]
    NonFinite { epoch: usize, batch: usize, grad_norm: f64 },
    #[error("checkpoint: bad magic, expected \"VNTC\"")]
    BadMagic,
    #[error("checkpoint: unsupported version {0}")]
    Version(u16),
    #[error("checkpoint: CRC mismatch, stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
