use rand::Rng;

use super::connectivity::connectivity_score;
use super::magnitude::{apply_masks, compute_masks, PruneScope};
use super::PruneError;
use crate::autodiff::Scalar;
use crate::graph::{NetworkGraph, SkipInit, SkipPattern};

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    pub sparsity: f64,
    pub scope: PruneScope,
    pub pattern: SkipPattern,
    pub density: f64,
    pub skip_init: SkipInit,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            sparsity: 0.9,
            scope: PruneScope::GlobalFloor,
            pattern: SkipPattern::BlockSkip,
            density: 0.25,
            skip_init: SkipInit::Uniform(0.05),
        }
    }
}

/// Parameter and connectivity accounting for one pruning run.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneSummary {
    pub sparsity: f64,
    pub scope: PruneScope,
    pub pattern: String,
    pub density: f64,
    pub params_total_a: usize,
    pub params_effective_a: usize,
    pub params_effective_masked: usize,
    pub params_effective_b: usize,
    pub skip_edges: usize,
    pub skip_nonzeros: usize,
    pub connectivity_a: f64,
    pub connectivity_masked: f64,
    pub connectivity_b: f64,
}

impl PruneSummary {
    pub const CSV_HEADER: &'static str = "sparsity,scope,pattern,density,params_total_a,params_effective_a,params_effective_masked,params_effective_b,skip_edges,skip_nonzeros,connectivity_a,connectivity_masked,connectivity_b";

    /// Effective parameters of B relative to A.
    pub fn param_ratio(&self) -> f64 {
        self.params_effective_b as f64 / self.params_effective_a as f64
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("sparsity", self.sparsity.to_string()),
            ("scope", self.scope.name().to_string()),
            ("pattern", self.pattern.clone()),
            ("density", self.density.to_string()),
            ("params_total_a", self.params_total_a.to_string()),
            ("params_effective_a", self.params_effective_a.to_string()),
            ("params_effective_masked", self.params_effective_masked.to_string()),
            ("params_effective_b", self.params_effective_b.to_string()),
            ("skip_edges", self.skip_edges.to_string()),
            ("skip_nonzeros", self.skip_nonzeros.to_string()),
            ("connectivity_a", format!("{:e}", self.connectivity_a)),
            ("connectivity_masked", format!("{:e}", self.connectivity_masked)),
            ("connectivity_b", format!("{:e}", self.connectivity_b)),
        ]
    }

    pub fn to_kv(&self) -> String {
        crate::kv::render(&self.to_pairs())
    }

    pub fn csv_row(&self) -> String {
        let cells: Vec<String> = self
            .to_pairs()
            .into_iter()
            .map(|(_, v)| if v.contains(',') { format!("\"{v}\"") } else { v })
            .collect();
        cells.join(",")
    }

    pub fn from_kv(text: &str) -> Result<Self, PruneError> {
        let pairs = crate::kv::parse(text).map_err(PruneError::Summary)?;
        let get = |k: &str| -> Result<&str, PruneError> {
            pairs
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| PruneError::Summary(format!("missing key {k}")))
        };
        fn num<N: std::str::FromStr>(k: &str, v: &str) -> Result<N, PruneError> {
            v.parse()
                .map_err(|_| PruneError::Summary(format!("bad value for {k}: {v:?}")))
        }
        Ok(PruneSummary {
            sparsity: num("sparsity", get("sparsity")?)?,
            scope: PruneScope::parse(get("scope")?)
                .ok_or_else(|| PruneError::Summary("bad scope".into()))?,
            pattern: get("pattern")?.to_string(),
            density: num("density", get("density")?)?,
            params_total_a: num("params_total_a", get("params_total_a")?)?,
            params_effective_a: num("params_effective_a", get("params_effective_a")?)?,
            params_effective_masked: num("params_effective_masked", get("params_effective_masked")?)?,
            params_effective_b: num("params_effective_b", get("params_effective_b")?)?,
            skip_edges: num("skip_edges", get("skip_edges")?)?,
            skip_nonzeros: num("skip_nonzeros", get("skip_nonzeros")?)?,
            connectivity_a: num("connectivity_a", get("connectivity_a")?)?,
            connectivity_masked: num("connectivity_masked", get("connectivity_masked")?)?,
            connectivity_b: num("connectivity_b", get("connectivity_b")?)?,
        })
    }
}

/// Derives the pruned, skip-rewired network ("NeuralNetB") from a trained
/// dense one: one-shot magnitude masks, then sparse skip edges.
pub fn make_neural_net_b<T: Scalar, R: Rng + ?Sized>(
    trained_a: &NetworkGraph<T>,
    config: &PruneConfig,
    rng: &mut R,
) -> Result<(NetworkGraph<T>, PruneSummary), PruneError> {
    let masks = compute_masks(trained_a, config.sparsity, config.scope)?;
    let masked = apply_masks(trained_a, &masks)?;
    let mut b = masked.clone();
    let ids = b.add_skip_edges(&config.pattern, config.density, config.skip_init, rng)?;
    b.validate_dag()?;
    let skip_nonzeros = ids.iter().map(|&i| b.skips()[i].nonzero_count()).sum();
    let summary = PruneSummary {
        sparsity: config.sparsity,
        scope: config.scope,
        pattern: config.pattern.name(),
        density: config.density,
        params_total_a: trained_a.param_count(),
        params_effective_a: trained_a.effective_param_count(),
        params_effective_masked: masked.effective_param_count(),
        params_effective_b: b.effective_param_count(),
        skip_edges: ids.len(),
        skip_nonzeros,
        connectivity_a: connectivity_score(trained_a).score,
        connectivity_masked: connectivity_score(&masked).score,
        connectivity_b: connectivity_score(&b).score,
    };
    Ok((b, summary))
}
