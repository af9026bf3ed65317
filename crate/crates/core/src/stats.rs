//! Correlation and error statistics used for calibration and evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in sample"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("correlation undefined for a constant vector"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_unchecked(x, y)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation with midranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_unchecked(&average_ranks(x), &average_ranks(y))
}

/// Predictions against ground truth, equal length and at least three points.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    predictions: Vec<f64>,
    targets: Vec<f64>,
}

impl PairedSample {
    pub fn new(predictions: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        check_pair(&predictions, &targets)?;
        Ok(Self {
            predictions,
            targets,
        })
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Agreement between predicted and observed scores.
///
/// Correlations are `None` when the predictions are constant. Percentages are
/// relative to `max(targets) - min(targets)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub spearman_rho: Option<f64>,
    pub pearson_r: Option<f64>,
    pub r_squared: f64,
    pub rmse: f64,
    pub mae: f64,
    pub rmse_pct: f64,
    pub mae_pct: f64,
    pub n: usize,
    pub target_range: f64,
}

pub fn regression_metrics(sample: &PairedSample) -> Result<MetricReport> {
    let (p, t) = (sample.predictions(), sample.targets());
    let n = t.len() as f64;
    let mt = mean(t);
    let ss_tot: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::degenerate("targets have zero variance; R² undefined"));
    }
    let mut ss_res = 0.0;
    let mut abs_sum = 0.0;
    for (a, b) in p.iter().zip(t) {
        let r = a - b;
        ss_res += r * r;
        abs_sum += r.abs();
    }
    let rmse = (ss_res / n).sqrt();
    let mae = abs_sum / n;
    let (lo, hi) = t
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(MetricReport {
        spearman_rho: optional(spearman(p, t))?,
        pearson_r: optional(pearson(p, t))?,
        r_squared: 1.0 - ss_res / ss_tot,
        rmse,
        mae,
        rmse_pct: percent_of_range(rmse, range),
        mae_pct: percent_of_range(mae, range),
        n: t.len(),
        target_range: range,
    })
}

/// `100 * value / range`.
pub fn percent_of_range(value: f64, range: f64) -> f64 {
    100.0 * value / range
}

/// Mean and sample standard deviation (divide by `n - 1`); SD is 0 for a single value.
pub fn mean_and_sample_sd(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let m = mean(v);
    if v.len() == 1 {
        return Some((m, 0.0));
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    Some((m, var.sqrt()))
}
