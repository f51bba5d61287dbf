use std::collections::BTreeMap;

use super::StatsError;

fn check_pair(pred: &[f64], reference: &[f64]) -> Result<(), StatsError> {
    if pred.len() != reference.len() {
        return Err(StatsError::Length(format!(
            "{} predictions against {} references",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Err(StatsError::Length("no samples".into()));
    }
    if pred.iter().chain(reference).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn rmse(pred: &[f64], reference: &[f64]) -> Result<f64, StatsError> {
    check_pair(pred, reference)?;
    let se: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum();
    Ok((se / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], reference: &[f64]) -> Result<f64, StatsError> {
    check_pair(pred, reference)?;
    let ae: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum();
    Ok(ae / pred.len() as f64)
}

/// Pearson correlation from one pass of running means and co-moments.
pub fn pearson_r(pred: &[f64], reference: &[f64]) -> Result<f64, StatsError> {
    check_pair(pred, reference)?;
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&x, &y)) in pred.iter().zip(reference).enumerate() {
        let n = (i + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Bias and limits of agreement of `pred - reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlandAltman {
    pub mean_diff: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn bland_altman(pred: &[f64], reference: &[f64], coverage: f64) -> Result<BlandAltman, StatsError> {
    check_pair(pred, reference)?;
    if pred.len() < 2 {
        return Err(StatsError::Length("agreement limits need at least two pairs".into()));
    }
    let d: Vec<f64> = pred.iter().zip(reference).map(|(p, r)| p - r).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(BlandAltman {
        mean_diff: mean,
        lower: mean - coverage * sd,
        upper: mean + coverage * sd,
    })
}

/// RMSE inside each artifact level. Levels with no windows are absent.
pub fn stratified_error(pred: &[f64], reference: &[f64], levels: &[u8]) -> Result<BTreeMap<u8, f64>, StatsError> {
    check_pair(pred, reference)?;
    if levels.len() != pred.len() {
        return Err(StatsError::Length(format!("{} levels for {} samples", levels.len(), pred.len())));
    }
    let mut acc: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
    for ((p, r), &l) in pred.iter().zip(reference).zip(levels) {
        let e = acc.entry(l).or_insert((0.0, 0));
        e.0 += (p - r) * (p - r);
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(l, (se, n))| (l, (se / n as f64).sqrt())).collect())
}

/// Spread of per-subject RMSE values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectSpread {
    pub subjects: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl SubjectSpread {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn per_subject_rmse(pred: &[f64], reference: &[f64], subjects: &[u32]) -> Result<BTreeMap<u32, f64>, StatsError> {
    check_pair(pred, reference)?;
    if subjects.len() != pred.len() {
        return Err(StatsError::Length(format!("{} subject ids for {} samples", subjects.len(), pred.len())));
    }
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for ((p, r), &s) in pred.iter().zip(reference).zip(subjects) {
        let e = acc.entry(s).or_insert((0.0, 0));
        e.0 += (p - r) * (p - r);
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(s, (se, n))| (s, (se / n as f64).sqrt())).collect())
}

pub fn subject_spread(pred: &[f64], reference: &[f64], subjects: &[u32]) -> Result<SubjectSpread, StatsError> {
    let mut v: Vec<f64> = per_subject_rmse(pred, reference, subjects)?.into_values().collect();
    v.sort_by(f64::total_cmp);
    Ok(SubjectSpread {
        subjects: v.len(),
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}
