use super::StatsError;

/// Largest number of nonzero differences handled by the exact distribution.
pub const EXACT_MAX_N: usize = 25;
pub const MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Annotation {
    /// "NS": not statistically different at the chosen alpha.
    NotSignificant,
    Significant,
}

impl Annotation {
    pub fn label(self) -> &'static str {
        match self {
            Annotation::NotSignificant => "NS",
            Annotation::Significant => "significant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    /// Normal approximation with continuity and tie corrections.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    /// Sum of the ranks of positive differences `a - b`.
    pub statistic: f64,
    /// Pairs left after zero differences are dropped.
    pub n_used: usize,
    pub p_value: f64,
    pub annotation: Annotation,
    pub alpha: f64,
    pub method: Method,
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p-value of the positive-rank sum under random signs, computed
/// exactly by counting sign assignments. Ranks must be multiples of 1/2.
pub fn exact_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w = (2.0 * w_plus).round() as usize;
    let total = 2f64.powi(ranks.len() as i32);
    let lower: f64 = counts[..=w.min(max)].iter().sum::<f64>() / total;
    let upper: f64 = counts[w.min(max + 1)..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p_value(ranks: &[f64], abs_d: &[f64], w_plus: f64) -> Result<f64, StatsError> {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs_d.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Err(StatsError::Degenerate("rank variance is zero".into()));
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(libm::erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Wilcoxon signed-rank test on paired values (typically per-window absolute
/// errors of two models on the same windows). Zero differences are dropped.
pub fn paired_significance(a: &[f64], b: &[f64], alpha: f64) -> Result<SignificanceResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Length(format!("{} vs {} paired values", a.len(), b.len())));
    }
    if a.len() < MIN_PAIRS {
        return Err(StatsError::Length(format!("{} pairs; at least {MIN_PAIRS} are required", a.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::Degenerate("every pair is tied".into()));
    }
    let abs_d: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&abs_d);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let (p_value, method) = if d.len() <= EXACT_MAX_N {
        (exact_p_value(&ranks, w_plus), Method::Exact)
    } else {
        (normal_p_value(&ranks, &abs_d, w_plus)?, Method::Normal)
    };
    Ok(SignificanceResult {
        statistic: w_plus,
        n_used: d.len(),
        p_value,
        annotation: if p_value >= alpha {
            Annotation::NotSignificant
        } else {
            Annotation::Significant
        },
        alpha,
        method,
    })
}
