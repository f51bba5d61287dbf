//! Evaluation metrics, paired significance testing and model comparison.

mod compare;
mod metrics;
mod plots;
mod wilcoxon;

pub use compare::{
    compare_models, evaluate, metrics_csv, ComparisonSummary, EvalReport, Predictions, DEFAULT_ALPHA, LOA_COVERAGE,
    METRICS_CSV_HEADER,
};
pub use metrics::{
    bland_altman, mae, pearson_r, per_subject_rmse, quantile_sorted, rmse, stratified_error, subject_spread,
    BlandAltman, SubjectSpread,
};
pub use plots::{level_bars_svg, scatter_svg};
pub use wilcoxon::{exact_p_value, midranks, paired_significance, Annotation, Method, SignificanceResult, EXACT_MAX_N, MIN_PAIRS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length error: {0}")]
    Length(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("zero variance; correlation is undefined")]
    ZeroVariance,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid setting: {0}")]
    Config(String),
    #[error("models are not comparable: {0}")]
    Mismatch(String),
}
