//! Gradient-boosted trees: squared loss for regression, logistic loss for
//! binary classification and softmax loss for more classes. Leaves take a
//! Newton step with L2 regularization, scaled by the learning rate.

use serde::{Deserialize, Serialize};

use super::design::DenseMatrix;
use super::linear::sigmoid;
use super::tree::{grow, Newton, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedParams {
    /// Initial score per output (one for regression / binary).
    pub init: Vec<f64>,
    /// `trees[round][output]`, leaves already scaled by the learning rate.
    pub trees: Vec<Vec<Tree>>,
}

impl BoostedParams {
    pub fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.init.clone();
        for round in &self.trees {
            for (k, t) in round.iter().enumerate() {
                s[k] += t.predict(row)[0];
            }
        }
        s
    }

    /// Scores after only the first `n_rounds` rounds.
    pub fn raw_scores_truncated(&self, row: &[f64], n_rounds: usize) -> Vec<f64> {
        let mut s = self.init.clone();
        for round in self.trees.iter().take(n_rounds) {
            for (k, t) in round.iter().enumerate() {
                s[k] += t.predict(row)[0];
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub tree: TreeParams,
}

fn mean_one(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let n = weights.len() as f64;
    weights.iter().map(|w| w * n / total).collect()
}

pub(crate) fn fit_regression(x: &DenseMatrix, y: &[f64], weights: &[f64], cfg: BoostConfig) -> BoostedParams {
    let w = mean_one(weights);
    let total: f64 = w.iter().sum();
    let init = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / total;
    let rows: Vec<usize> = (0..x.n_rows).collect();
    let mut f = vec![init; x.n_rows];
    let hess = vec![1.0; x.n_rows];
    let mut grad = vec![0.0; x.n_rows];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        for i in 0..x.n_rows {
            grad[i] = f[i] - y[i];
        }
        let crit = Newton {
            grad: &grad,
            hess: &hess,
            weights: &w,
            lambda: cfg.lambda,
        };
        let mut tree = grow(x, &rows, &crit, cfg.tree);
        tree.scale_leaves(cfg.learning_rate);
        for i in 0..x.n_rows {
            f[i] += tree.predict(x.row(i))[0];
        }
        trees.push(vec![tree]);
    }
    BoostedParams {
        init: vec![init],
        trees,
    }
}

/// `labels` are dense class indices in `0..n_classes`.
pub(crate) fn fit_classification(
    x: &DenseMatrix,
    labels: &[usize],
    n_classes: usize,
    weights: &[f64],
    cfg: BoostConfig,
) -> BoostedParams {
    let w = mean_one(weights);
    let total: f64 = w.iter().sum();
    let mut prior = vec![0.0; n_classes];
    for (i, &l) in labels.iter().enumerate() {
        prior[l] += w[i] / total;
    }
    let prior: Vec<f64> = prior.iter().map(|p| p.clamp(1e-6, 1.0 - 1e-6)).collect();
    let rows: Vec<usize> = (0..x.n_rows).collect();
    let n = x.n_rows;
    if n_classes == 2 {
        let init = (prior[1] / prior[0]).ln();
        let mut f = vec![init; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees = Vec::with_capacity(cfg.n_trees);
        for _ in 0..cfg.n_trees {
            for i in 0..n {
                let p = sigmoid(f[i]);
                let y = if labels[i] == 1 { 1.0 } else { 0.0 };
                grad[i] = p - y;
                hess[i] = (p * (1.0 - p)).max(1e-12);
            }
            let crit = Newton {
                grad: &grad,
                hess: &hess,
                weights: &w,
                lambda: cfg.lambda,
            };
            let mut tree = grow(x, &rows, &crit, cfg.tree);
            tree.scale_leaves(cfg.learning_rate);
            for i in 0..n {
                f[i] += tree.predict(x.row(i))[0];
            }
            trees.push(vec![tree]);
        }
        return BoostedParams {
            init: vec![init],
            trees,
        };
    }
    let init: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let probs: Vec<Vec<f64>> = f.iter().map(|s| softmax(s)).collect();
        let mut round = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            for i in 0..n {
                let p = probs[i][k];
                let y = if labels[i] == k { 1.0 } else { 0.0 };
                grad[i] = p - y;
                hess[i] = (p * (1.0 - p)).max(1e-12);
            }
            let crit = Newton {
                grad: &grad,
                hess: &hess,
                weights: &w,
                lambda: cfg.lambda,
            };
            let mut tree = grow(x, &rows, &crit, cfg.tree);
            tree.scale_leaves(cfg.learning_rate);
            round.push(tree);
        }
        for i in 0..n {
            for (k, t) in round.iter().enumerate() {
                f[i][k] += t.predict(x.row(i))[0];
            }
        }
        trees.push(round);
    }
    BoostedParams { init, trees }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
