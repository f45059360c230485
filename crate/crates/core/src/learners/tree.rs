//! Exact-split decision trees.
//!
//! One builder serves regression trees, boosting rounds and classification
//! trees; the split criterion is supplied through [`Criterion`]. Candidate
//! thresholds are midpoints between consecutive distinct feature values.
//! Features are scanned in index order and thresholds in ascending order, and
//! a candidate replaces the incumbent only on strictly larger gain, so ties go
//! to the lowest feature index and then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::design::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: Vec<f64>) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    /// Leaf value reached by `row` (`x <= threshold` goes left).
    pub fn predict(&self, row: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let TreeNode::Leaf { value } = n {
                value.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }
}

/// Additive node statistics plus a score whose increase measures split gain.
pub(crate) trait Criterion {
    type Stats: Clone;
    fn zero(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, row: usize);
    fn sub(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    /// Larger is better; gain = score(left) + score(right) - score(parent).
    fn score(&self, stats: &Self::Stats) -> f64;
    fn weight(&self, stats: &Self::Stats) -> f64;
    fn leaf(&self, stats: &Self::Stats) -> Vec<f64>;
}

/// Second-order criterion: leaf value `-G / (H + lambda)` and score
/// `G^2 / (H + lambda)`, with `G`, `H` the weighted gradient and hessian sums.
/// With gradient `-y`, unit hessian and `lambda = 0` this is the weighted
/// variance-reduction criterion of a regression tree.
pub(crate) struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub weights: &'a [f64],
    pub lambda: f64,
}

impl Criterion for Newton<'_> {
    type Stats = [f64; 3];

    fn zero(&self) -> [f64; 3] {
        [0.0; 3]
    }

    #[inline]
    fn add(&self, s: &mut [f64; 3], row: usize) {
        let w = self.weights[row];
        s[0] += w * self.grad[row];
        s[1] += w * self.hess[row];
        s[2] += w;
    }

    fn sub(&self, total: &[f64; 3], part: &[f64; 3]) -> [f64; 3] {
        [total[0] - part[0], total[1] - part[1], total[2] - part[2]]
    }

    #[inline]
    fn score(&self, s: &[f64; 3]) -> f64 {
        let denom = s[1] + self.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            s[0] * s[0] / denom
        }
    }

    fn weight(&self, s: &[f64; 3]) -> f64 {
        s[2]
    }

    fn leaf(&self, s: &[f64; 3]) -> Vec<f64> {
        let denom = s[1] + self.lambda;
        vec![if denom <= 0.0 { 0.0 } else { -s[0] / denom }]
    }
}

/// Weighted Gini criterion. Score is `sum_k c_k^2 / W`, which equals
/// `W (1 - gini)`, so maximizing the child sum minimizes weighted impurity.
pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
}

impl Criterion for Gini<'_> {
    type Stats = Vec<f64>;

    fn zero(&self) -> Vec<f64> {
        vec![0.0; self.n_classes + 1]
    }

    #[inline]
    fn add(&self, s: &mut Vec<f64>, row: usize) {
        let w = self.weights[row];
        s[self.labels[row]] += w;
        s[self.n_classes] += w;
    }

    fn sub(&self, total: &Vec<f64>, part: &Vec<f64>) -> Vec<f64> {
        total.iter().zip(part).map(|(a, b)| a - b).collect()
    }

    fn score(&self, s: &Vec<f64>) -> f64 {
        let w = s[self.n_classes];
        if w <= 0.0 {
            return 0.0;
        }
        s[..self.n_classes].iter().map(|c| c * c).sum::<f64>() / w
    }

    fn weight(&self, s: &Vec<f64>) -> f64 {
        s[self.n_classes]
    }

    fn leaf(&self, s: &Vec<f64>) -> Vec<f64> {
        let w = s[self.n_classes];
        if w <= 0.0 {
            return vec![1.0 / self.n_classes as f64; self.n_classes];
        }
        s[..self.n_classes].iter().map(|c| c / w).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Best split of a node: feature, threshold, and the gain it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    /// Number of rows (in sorted order of `feature`) going left.
    pub n_left: usize,
}

/// Scan every feature's sorted row list and return the best split, if any
/// split has positive gain.
pub(crate) fn best_split<C: Criterion>(
    x: &DenseMatrix,
    sorted: &[Vec<usize>],
    criterion: &C,
    parent: &C::Stats,
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = sorted.first().map(Vec::len).unwrap_or(0);
    let parent_score = criterion.score(parent);
    let tol = 1e-12 * parent_score.abs().max(f64::MIN_POSITIVE);
    let mut best: Option<SplitChoice> = None;
    for (f, rows) in sorted.iter().enumerate() {
        let mut left = criterion.zero();
        for k in 0..n.saturating_sub(1) {
            let r = rows[k];
            criterion.add(&mut left, r);
            let xv = x.get(r, f);
            let xn = x.get(rows[k + 1], f);
            if xn <= xv {
                continue;
            }
            let n_left = k + 1;
            if n_left < min_samples_leaf || n - n_left < min_samples_leaf {
                continue;
            }
            let right = criterion.sub(parent, &left);
            if criterion.weight(&left) <= 0.0 || criterion.weight(&right) <= 0.0 {
                continue;
            }
            let gain = criterion.score(&left) + criterion.score(&right) - parent_score;
            if gain > tol && best.is_none_or(|b| gain > b.gain) {
                let mut threshold = xv + (xn - xv) / 2.0;
                if threshold >= xn {
                    threshold = xv;
                }
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    gain,
                    n_left,
                });
            }
        }
    }
    best
}

/// Grow a tree on `rows` of `x`.
pub(crate) fn grow<C: Criterion>(
    x: &DenseMatrix,
    rows: &[usize],
    criterion: &C,
    params: TreeParams,
) -> Tree {
    let sorted: Vec<Vec<usize>> = (0..x.n_cols)
        .map(|f| {
            let mut r = rows.to_vec();
            r.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            r
        })
        .collect();
    let mut nodes = Vec::new();
    let mut in_left = vec![false; x.n_rows];
    let root_rows = rows.to_vec();
    build(
        x,
        sorted,
        &root_rows,
        criterion,
        params,
        0,
        &mut nodes,
        &mut in_left,
    );
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn build<C: Criterion>(
    x: &DenseMatrix,
    sorted: Vec<Vec<usize>>,
    rows: &[usize],
    criterion: &C,
    params: TreeParams,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
    in_left: &mut [bool],
) -> usize {
    let mut stats = criterion.zero();
    for &r in rows {
        criterion.add(&mut stats, r);
    }
    let id = nodes.len();
    nodes.push(TreeNode::Leaf {
        value: criterion.leaf(&stats),
    });
    if depth >= params.max_depth || rows.len() < 2 * params.min_samples_leaf || x.n_cols == 0 {
        return id;
    }
    let Some(choice) = best_split(x, &sorted, criterion, &stats, params.min_samples_leaf) else {
        return id;
    };
    let left_rows: Vec<usize> = sorted[choice.feature][..choice.n_left].to_vec();
    for &r in &left_rows {
        in_left[r] = true;
    }
    let mut left_sorted = Vec::with_capacity(sorted.len());
    let mut right_sorted = Vec::with_capacity(sorted.len());
    for list in sorted {
        let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| in_left[i]);
        left_sorted.push(l);
        right_sorted.push(r);
    }
    for &r in &left_rows {
        in_left[r] = false;
    }
    let right_rows = right_sorted[0].clone();
    let left_rows = left_sorted[0].clone();
    let left = build(x, left_sorted, &left_rows, criterion, params, depth + 1, nodes, in_left);
    let right = build(x, right_sorted, &right_rows, criterion, params, depth + 1, nodes, in_left);
    nodes[id] = TreeNode::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        left,
        right,
    };
    id
}
