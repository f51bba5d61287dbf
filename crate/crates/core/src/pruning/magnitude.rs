use std::cmp::Ordering;

use super::{PruneError, PruneMask};
use crate::autodiff::Scalar;
use crate::graph::NetworkGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneScope {
    /// One magnitude threshold across every prunable layer.
    Global,
    /// A separate threshold inside each layer.
    PerLayer,
    /// Global threshold, except that every layer first keeps its largest
    /// [`FLOOR_SHARE`] of the per-layer budget. Stops one wide, small-valued
    /// layer from losing all of its weights.
    GlobalFloor,
}

/// Fraction of a layer's uniform survivor budget reserved under
/// [`PruneScope::GlobalFloor`].
pub const FLOOR_SHARE: f64 = 0.2;

impl PruneScope {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "global" => Some(PruneScope::Global),
            "per-layer" => Some(PruneScope::PerLayer),
            "global-floor" => Some(PruneScope::GlobalFloor),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PruneScope::Global => "global",
            PruneScope::PerLayer => "per-layer",
            PruneScope::GlobalFloor => "global-floor",
        }
    }
}

/// Survivors kept out of `n` weights at `sparsity`: ceil((1 - s) * n).
pub fn kept_count(n: usize, sparsity: f64) -> usize {
    let k = ((1.0 - sparsity) * n as f64 - 1e-9).ceil();
    (k.max(0.0) as usize).min(n)
}

/// Indices of the `k` largest magnitudes; equal magnitudes favour the lower index.
pub fn top_k_by_magnitude(magnitudes: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..magnitudes.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        let cmp = |a: &usize, b: &usize| -> Ordering {
            magnitudes[*b]
                .total_cmp(&magnitudes[*a])
                .then_with(|| a.cmp(b))
        };
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

fn check_sparsity(sparsity: f64) -> Result<(), PruneError> {
    if (0.0..1.0).contains(&sparsity) {
        Ok(())
    } else {
        Err(PruneError::InvalidSparsity(sparsity))
    }
}

/// One-shot magnitude masks for every conv and dense weight. Biases and skip
/// kernels are never pruned.
pub fn compute_masks<T: Scalar>(
    graph: &NetworkGraph<T>,
    sparsity: f64,
    scope: PruneScope,
) -> Result<Vec<PruneMask>, PruneError> {
    check_sparsity(sparsity)?;
    let layers: Vec<(usize, &[usize], Vec<f64>)> = graph
        .layers()
        .iter()
        .filter(|l| l.is_prunable())
        .map(|l| {
            let w = &graph.layer_params(l.id).expect("prunable layers own weights").weight;
            let mags = w.data().iter().map(|v| v.as_f64().abs()).collect();
            (l.id, w.shape(), mags)
        })
        .collect();

    match scope {
        PruneScope::PerLayer => Ok(layers
            .into_iter()
            .map(|(id, shape, mags)| {
                let k = kept_count(mags.len(), sparsity);
                let mut keep = vec![false; mags.len()];
                for i in top_k_by_magnitude(&mags, k) {
                    keep[i] = true;
                }
                PruneMask::new(id, shape.to_vec(), keep)
            })
            .collect()),
        PruneScope::Global | PruneScope::GlobalFloor => {
            let mut all: Vec<f64> = layers.iter().flat_map(|(_, _, m)| m.iter().copied()).collect();
            let mut k = kept_count(all.len(), sparsity);
            let mut keep_all = vec![false; all.len()];
            if scope == PruneScope::GlobalFloor {
                let share = FLOOR_SHARE * (1.0 - sparsity);
                let mut offset = 0;
                for (_, _, mags) in &layers {
                    let floor = ((share * mags.len() as f64 - 1e-9).ceil().max(0.0) as usize).min(mags.len());
                    for i in top_k_by_magnitude(mags, floor) {
                        keep_all[offset + i] = true;
                        // Reserved weights drop out of the global ranking.
                        all[offset + i] = -1.0;
                        k = k.saturating_sub(1);
                    }
                    offset += mags.len();
                }
            }
            for i in top_k_by_magnitude(&all, k) {
                keep_all[i] = true;
            }
            let mut offset = 0;
            Ok(layers
                .into_iter()
                .map(|(id, shape, mags)| {
                    let keep = keep_all[offset..offset + mags.len()].to_vec();
                    offset += mags.len();
                    PruneMask::new(id, shape.to_vec(), keep)
                })
                .collect())
        }
    }
}

/// Zeroes pruned weights and stores the masks on the graph so later
/// fine-tuning cannot revive them.
pub fn apply_masks<T: Scalar>(
    graph: &NetworkGraph<T>,
    masks: &[PruneMask],
) -> Result<NetworkGraph<T>, PruneError> {
    let mut out = graph.clone();
    for l in graph.layers().iter().filter(|l| l.is_prunable()) {
        if !masks.iter().any(|m| m.layer_id == l.id) {
            return Err(PruneError::MissingMask(l.id));
        }
    }
    for m in masks {
        let params = out
            .layer_params_mut(m.layer_id)
            .ok_or(PruneError::MissingMask(m.layer_id))?;
        if params.weight.shape() != m.shape() {
            return Err(PruneError::Shape {
                layer: m.layer_id,
                mask: m.shape().to_vec(),
                weight: params.weight.shape().to_vec(),
            });
        }
        m.apply(params.weight.data_mut());
        out.set_mask(m.clone())?;
    }
    Ok(out)
}
