//! Declarative network topology: layer specs, sparse skip edges, parameter
//! accounting and forward execution on the autodiff tape.

mod network;
mod spec;
mod vgg;

use thiserror::Error;

use crate::autodiff::AutodiffError;

pub use network::{
    is_acyclic, BlockRange, LayerParams, NetworkGraph, ParamKey, Recorded, SkipEdge, SkipInit,
    SkipPattern,
};
pub use spec::{infer_shapes, ActShape, ArchSpec, LayerKind, LayerSpec, SkipSpec};
pub use vgg::{build_neural_net_a, reference_vgg16_2d, reference_vgg16_2d_count, VggConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph construction failed: {0}")]
    Construction(String),
    #[error("skip edge {edge}: shapes cannot be merged: {detail}")]
    MergeShape { edge: usize, detail: String },
    #[error("graph is not a DAG: {0}")]
    Cycle(String),
    #[error("invalid skip pattern: {0}")]
    Pattern(String),
    #[error("bad input batch: {0}")]
    Input(String),
    #[error("architecture text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[cfg(test)]
mod tests;
