use serde::{Deserialize, Serialize};

use super::design::DenseMatrix;

/// k-nearest-neighbour model on standardized features. Distance ties are
/// broken by training row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Standardized training rows, row-major.
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KnnParams {
    pub(crate) fn new(x: &DenseMatrix, targets: &[f64], weights: &[f64], k: usize) -> Self {
        let p = x.n_cols;
        let n = x.n_rows as f64;
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for j in 0..p {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / n;
            means[j] = m;
            scales[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        let mut points = Vec::with_capacity(x.data.len());
        for i in 0..x.n_rows {
            for j in 0..p {
                points.push((x.get(i, j) - means[j]) / scales[j]);
            }
        }
        Self {
            k: k.min(x.n_rows),
            means,
            scales,
            points,
            targets: targets.to_vec(),
            weights: weights.to_vec(),
        }
    }

    /// Indices of the k nearest training rows to `row`.
    pub(crate) fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let p = self.means.len();
        let q: Vec<f64> = (0..p).map(|j| (row[j] - self.means[j]) / self.scales[j]).collect();
        let n = self.targets.len();
        let mut d: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let pt = &self.points[i * p..(i + 1) * p];
                let dist = pt.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (dist, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < n {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub(crate) fn predict_mean(&self, row: &[f64]) -> f64 {
        let nb = self.neighbours(row);
        let wsum: f64 = nb.iter().map(|&i| self.weights[i]).sum();
        if wsum > 0.0 {
            nb.iter().map(|&i| self.weights[i] * self.targets[i]).sum::<f64>() / wsum
        } else {
            nb.iter().map(|&i| self.targets[i]).sum::<f64>() / nb.len() as f64
        }
    }

    /// Weighted class shares among the neighbours; `targets` hold class indices.
    pub(crate) fn predict_shares(&self, row: &[f64], n_classes: usize) -> Vec<f64> {
        let nb = self.neighbours(row);
        let mut shares = vec![0.0; n_classes];
        let wsum: f64 = nb.iter().map(|&i| self.weights[i]).sum();
        for &i in &nb {
            let w = if wsum > 0.0 { self.weights[i] / wsum } else { 1.0 / nb.len() as f64 };
            shares[self.targets[i] as usize] += w;
        }
        shares
    }
}
