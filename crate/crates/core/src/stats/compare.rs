use std::collections::BTreeMap;
use std::fmt::Write;

use super::metrics::{bland_altman, mae, pearson_r, rmse, stratified_error, subject_spread, BlandAltman, SubjectSpread};
use super::wilcoxon::{paired_significance, SignificanceResult};
use super::StatsError;

/// Coverage factor of the Bland-Altman limits (95% under normality).
pub const LOA_COVERAGE: f64 = 1.96;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// One model's predictions on a labelled set of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub model_name: String,
    pub split: String,
    pub subject_ids: Vec<u32>,
    pub window_ids: Vec<u32>,
    pub levels: Vec<u8>,
    pub reference: Vec<f64>,
    pub predicted: Vec<f64>,
    pub effective_params: usize,
    pub connectivity: f64,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    fn check(&self) -> Result<(), StatsError> {
        let n = self.reference.len();
        let lens = [self.subject_ids.len(), self.window_ids.len(), self.levels.len(), self.predicted.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(StatsError::Length(format!(
                "{}: column lengths {lens:?} disagree with {n} references",
                self.model_name
            )));
        }
        Ok(())
    }

    pub fn abs_errors(&self) -> Vec<f64> {
        self.predicted.iter().zip(&self.reference).map(|(p, r)| (p - r).abs()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model_name: String,
    pub rmse: f64,
    pub mae: f64,
    pub pearson_r: f64,
    pub bland_altman: BlandAltman,
    pub per_level_rmse: BTreeMap<u8, f64>,
    pub n: usize,
}

pub fn evaluate(p: &Predictions) -> Result<EvalReport, StatsError> {
    p.check()?;
    Ok(EvalReport {
        model_name: p.model_name.clone(),
        rmse: rmse(&p.predicted, &p.reference)?,
        mae: mae(&p.predicted, &p.reference)?,
        pearson_r: pearson_r(&p.predicted, &p.reference)?,
        bland_altman: bland_altman(&p.predicted, &p.reference, LOA_COVERAGE)?,
        per_level_rmse: stratified_error(&p.predicted, &p.reference, &p.levels)?,
        n: p.len(),
    })
}

/// Differences are `b - a`; `delta_params` is relative to `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub report_a: EvalReport,
    pub report_b: EvalReport,
    pub spread_a: SubjectSpread,
    pub spread_b: SubjectSpread,
    pub delta_rmse: f64,
    pub delta_r: f64,
    pub delta_params: f64,
    pub delta_connectivity: f64,
    pub significance: SignificanceResult,
}

/// Compares two models evaluated on the same windows. The paired test runs on
/// per-window absolute errors.
pub fn compare_models(a: &Predictions, b: &Predictions, alpha: f64) -> Result<ComparisonSummary, StatsError> {
    a.check()?;
    b.check()?;
    if a.len() != b.len() {
        return Err(StatsError::Mismatch(format!("{} windows vs {}", a.len(), b.len())));
    }
    let same_windows = a
        .subject_ids
        .iter()
        .zip(&a.window_ids)
        .eq(b.subject_ids.iter().zip(&b.window_ids));
    if !same_windows {
        return Err(StatsError::Mismatch("the two models were evaluated on different windows".into()));
    }
    let report_a = evaluate(a)?;
    let report_b = evaluate(b)?;
    let significance = paired_significance(&b.abs_errors(), &a.abs_errors(), alpha).or_else(|e| match e {
        // Identical errors everywhere: nothing to test, so no difference.
        StatsError::Degenerate(_) => Ok(SignificanceResult {
            statistic: 0.0,
            n_used: 0,
            p_value: 1.0,
            annotation: super::Annotation::NotSignificant,
            alpha,
            method: super::Method::Exact,
        }),
        other => Err(other),
    })?;
    let delta_params = if a.effective_params == 0 {
        0.0
    } else {
        (b.effective_params as f64 - a.effective_params as f64) / a.effective_params as f64
    };
    Ok(ComparisonSummary {
        spread_a: subject_spread(&a.predicted, &a.reference, &a.subject_ids)?,
        spread_b: subject_spread(&b.predicted, &b.reference, &b.subject_ids)?,
        delta_rmse: report_b.rmse - report_a.rmse,
        delta_r: report_b.pearson_r - report_a.pearson_r,
        delta_params,
        delta_connectivity: b.connectivity - a.connectivity,
        report_a,
        report_b,
        significance,
    })
}

pub const METRICS_CSV_HEADER: &str = "model,split,level,n,rmse,mae,pearson_r,mean_diff,lower_loa,upper_loa";

fn fmt_opt(v: Result<f64, StatsError>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per (model, split, artifact level present). Statistics that are
/// undefined for a bucket (correlation without variance, limits from one
/// window) are left empty.
pub fn metrics_csv(models: &[&Predictions]) -> Result<String, StatsError> {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for p in models {
        p.check()?;
        let mut levels: Vec<u8> = p.levels.clone();
        levels.sort_unstable();
        levels.dedup();
        for level in levels {
            let idx: Vec<usize> = (0..p.len()).filter(|&i| p.levels[i] == level).collect();
            let pr: Vec<f64> = idx.iter().map(|&i| p.predicted[i]).collect();
            let rf: Vec<f64> = idx.iter().map(|&i| p.reference[i]).collect();
            let ba = bland_altman(&pr, &rf, LOA_COVERAGE);
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{},{},{},{}",
                p.model_name,
                p.split,
                level,
                idx.len(),
                rmse(&pr, &rf)?,
                mae(&pr, &rf)?,
                fmt_opt(pearson_r(&pr, &rf)),
                fmt_opt(ba.clone().map(|b| b.mean_diff)),
                fmt_opt(ba.clone().map(|b| b.lower)),
                fmt_opt(ba.clone().map(|b| b.upper)),
            );
        }
    }
    Ok(out)
}

impl ComparisonSummary {
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut push = |k: &str, val: String| v.push((k.to_string(), val));
        for (tag, r, s) in [("a", &self.report_a, &self.spread_a), ("b", &self.report_b, &self.spread_b)] {
            push(&format!("{tag}.model"), r.model_name.clone());
            push(&format!("{tag}.n"), r.n.to_string());
            push(&format!("{tag}.rmse"), format!("{:.6}", r.rmse));
            push(&format!("{tag}.mae"), format!("{:.6}", r.mae));
            push(&format!("{tag}.pearson_r"), format!("{:.6}", r.pearson_r));
            push(&format!("{tag}.mean_diff"), format!("{:.6}", r.bland_altman.mean_diff));
            push(&format!("{tag}.lower_loa"), format!("{:.6}", r.bland_altman.lower));
            push(&format!("{tag}.upper_loa"), format!("{:.6}", r.bland_altman.upper));
            for (l, e) in &r.per_level_rmse {
                push(&format!("{tag}.rmse_level{l}"), format!("{e:.6}"));
            }
            push(&format!("{tag}.subject_rmse_min"), format!("{:.6}", s.min));
            push(&format!("{tag}.subject_rmse_max"), format!("{:.6}", s.max));
            push(&format!("{tag}.subject_rmse_iqr"), format!("{:.6}", s.iqr()));
        }
        push("delta_rmse", format!("{:.6}", self.delta_rmse));
        push("delta_r", format!("{:.6}", self.delta_r));
        push("delta_params", format!("{:.6}", self.delta_params));
        push("delta_connectivity", format!("{:.6e}", self.delta_connectivity));
        push("wilcoxon_statistic", format!("{}", self.significance.statistic));
        push("wilcoxon_n", self.significance.n_used.to_string());
        push("p_value", format!("{:.6}", self.significance.p_value));
        push("alpha", format!("{}", self.significance.alpha));
        push("annotation", self.significance.annotation.label().to_string());
        v
    }

    pub fn to_kv(&self) -> String {
        crate::kv::render(&self.to_pairs())
    }
}
