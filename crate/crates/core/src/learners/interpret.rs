//! Model interpretation: permutation importance and accumulated local
//! effects (ALE).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::Predictor;
use crate::data::{Column, ColumnKind, Table};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Misclassification,
}

impl Metric {
    pub fn loss(self, predictions: &[f64], targets: &[f64]) -> f64 {
        let n = targets.len().max(1) as f64;
        match self {
            Metric::Mse => predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
            Metric::Misclassification => {
                predictions.iter().zip(targets).filter(|(p, t)| p != t).count() as f64 / n
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean increase of the metric over repeats.
    pub importance: f64,
    /// Monte-Carlo standard error of that mean.
    pub std_error: f64,
}

/// Increase in `metric` when each column is shuffled, averaged over
/// `n_repeats` permutations. Columns are processed in table order; each
/// (column, repeat) pair uses its own derived seed.
pub fn permutation_importance<P: Predictor + ?Sized>(
    model: &P,
    features: &Table,
    targets: &[f64],
    metric: Metric,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if n_repeats < 1 {
        return Err(Error::arg("n_repeats must be >= 1"));
    }
    if targets.len() != features.n_rows() {
        return Err(Error::arg("targets and features differ in length"));
    }
    let base = metric.loss(&model.predict_values(features)?, targets);
    let n = features.n_rows();
    let mut out = Vec::with_capacity(features.n_cols());
    for (j, (name, column)) in features.columns().enumerate() {
        let mut deltas = Vec::with_capacity(n_repeats);
        for r in 0..n_repeats {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = rng_from_seed(derive_seed(derive_seed(seed, j as u64), r as u64));
            perm.shuffle(&mut rng);
            let shuffled = features.replace_column(name, column.take(&perm))?;
            let loss = metric.loss(&model.predict_values(&shuffled)?, targets);
            deltas.push(loss - base);
        }
        let m = deltas.iter().sum::<f64>() / n_repeats as f64;
        let se = if n_repeats > 1 {
            let v = deltas.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (n_repeats - 1) as f64;
            (v / n_repeats as f64).sqrt()
        } else {
            0.0
        };
        out.push(FeatureImportance {
            feature: name.to_string(),
            importance: m,
            std_error: se,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleCurve {
    pub feature: String,
    /// Bin edges, ascending, `n_bins + 1` of them (fewer if quantiles tie).
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

/// First-order ALE of `focal` with equal-frequency bins.
///
/// Within each bin the mean of `f(upper edge) - f(lower edge)` (other
/// features held at their observed values) is accumulated from the left.
/// The value reported at a bin center is the mean of the accumulated effect
/// at its two edges, and the curve is centered to count-weighted mean zero.
pub fn accumulated_local_effects<P: Predictor + ?Sized>(
    model: &P,
    features: &Table,
    focal: &str,
    n_bins: usize,
) -> Result<AleCurve> {
    if n_bins < 2 {
        return Err(Error::arg("n_bins must be >= 2"));
    }
    let col = features.column(focal)?;
    if col.kind() != ColumnKind::Float {
        return Err(Error::arg(format!("ALE focal feature '{focal}' must be a float column")));
    }
    let x = col.as_f64().expect("float column");
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|b| quantile_sorted(&sorted, b as f64 / n_bins as f64))
        .collect();
    edges.dedup();
    if edges.len() < 2 {
        return Err(Error::arg(format!("ALE focal feature '{focal}' is constant")));
    }
    let nb = edges.len() - 1;
    let bin_of = |v: f64| -> usize {
        // First bin whose upper edge is >= v; the lowest edge joins bin 0.
        edges[1..].partition_point(|e| *e < v).min(nb - 1)
    };
    let bins: Vec<usize> = x.iter().map(|&v| bin_of(v)).collect();
    let lower: Vec<f64> = bins.iter().map(|&b| edges[b]).collect();
    let upper: Vec<f64> = bins.iter().map(|&b| edges[b + 1]).collect();
    let f_lo = model.predict_values(&features.replace_column(focal, Column::Float(lower))?)?;
    let f_hi = model.predict_values(&features.replace_column(focal, Column::Float(upper))?)?;
    let mut sums = vec![0.0; nb];
    let mut counts = vec![0usize; nb];
    for (i, &b) in bins.iter().enumerate() {
        sums[b] += f_hi[i] - f_lo[i];
        counts[b] += 1;
    }
    let mut acc = vec![0.0; nb + 1];
    for b in 0..nb {
        let step = if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 };
        acc[b + 1] = acc[b] + step;
    }
    let mut values: Vec<f64> = (0..nb).map(|b| 0.5 * (acc[b] + acc[b + 1])).collect();
    let total: usize = counts.iter().sum();
    let mean = values.iter().zip(&counts).map(|(v, c)| v * *c as f64).sum::<f64>() / total as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    let centers = (0..nb).map(|b| 0.5 * (edges[b] + edges[b + 1])).collect();
    Ok(AleCurve {
        feature: focal.to_string(),
        edges,
        centers,
        values,
        counts,
    })
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
