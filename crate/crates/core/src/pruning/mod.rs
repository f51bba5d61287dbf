//! One-shot magnitude pruning, sparse skip rewiring and block-level
//! connectivity scoring.

mod connectivity;
mod magnitude;
mod mask;
mod netb;

use thiserror::Error;

use crate::graph::GraphError;

pub use connectivity::{connectivity_score, BlockDag, BlockEdge, ConnectivityMethod, ConnectivityReport};
pub use magnitude::{apply_masks, compute_masks, kept_count, top_k_by_magnitude, PruneScope, FLOOR_SHARE};
pub use mask::PruneMask;
pub use netb::{make_neural_net_b, PruneConfig, PruneSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PruneError {
    #[error("sparsity must lie in [0, 1), got {0}")]
    InvalidSparsity(f64),
    #[error("no mask supplied for prunable layer {0}")]
    MissingMask(usize),
    #[error("mask for layer {layer} has shape {mask:?}, weight is {weight:?}")]
    Shape {
        layer: usize,
        mask: Vec<usize>,
        weight: Vec<usize>,
    },
    #[error("prune summary: {0}")]
    Summary(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
