//! Fitted regressors and classifiers, and their JSON persistence.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::boosting::{self, BoostConfig, BoostedParams};
use super::design::{DenseMatrix, FeatureSchema};
use super::knn::KnnParams;
use super::linear::{fit_logistic, fit_ridge, sigmoid, LinearParams};
use super::spec::LearnerSpec;
use super::tree::{grow, Gini, Newton, Tree, TreeParams};
use crate::data::Table;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Anything that maps a feature table to one number per row. Classifiers
/// return the predicted label.
pub trait Predictor {
    fn predict_values(&self, features: &Table) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RegressorParams {
    Linear(LinearParams),
    Tree(Tree),
    Boosted(BoostedParams),
    Knn(KnnParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRegressor {
    pub format_version: u32,
    pub family: String,
    pub hyperparameters: LearnerSpec,
    pub parameters: RegressorParams,
    pub feature_schema: FeatureSchema,
}

fn check_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let w = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::arg(format!("{} weights for {n} rows", w.len())));
            }
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::arg(format!("weight {i} is {} (must be finite and >= 0)", w[i])));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::arg("total weight is zero"));
    }
    Ok(w)
}

fn tree_params(max_depth: usize, min_samples_leaf: usize) -> TreeParams {
    TreeParams {
        max_depth,
        min_samples_leaf,
    }
}

fn mean_one(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let n = weights.len() as f64;
    weights.iter().map(|w| w * n / total).collect()
}

/// Fit `spec` to `targets` with optional nonnegative weights (uniform when
/// `None`).
pub fn fit_regressor(
    spec: &LearnerSpec,
    features: &Table,
    targets: &[f64],
    weights: Option<&[f64]>,
) -> Result<FittedRegressor> {
    spec.validate()?;
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::arg("cannot fit on empty data"));
    }
    if targets.len() != n {
        return Err(Error::arg(format!("{} targets for {n} rows", targets.len())));
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(Error::arg(format!("target {i} is not finite")));
    }
    let w = check_weights(n, weights)?;
    let schema = FeatureSchema::from_table(features);
    let x = schema.encode(features)?;
    let parameters = fit_regressor_matrix(spec, &x, targets, &w)?;
    Ok(FittedRegressor {
        format_version: MODEL_FORMAT_VERSION,
        family: spec.family_name().to_string(),
        hyperparameters: spec.clone(),
        parameters,
        feature_schema: schema,
    })
}

pub(crate) fn fit_regressor_matrix(
    spec: &LearnerSpec,
    x: &DenseMatrix,
    y: &[f64],
    w: &[f64],
) -> Result<RegressorParams> {
    Ok(match *spec {
        LearnerSpec::RidgeLinear { l2_penalty } => RegressorParams::Linear(fit_ridge(x, y, w, l2_penalty)?),
        LearnerSpec::CartTree {
            max_depth,
            min_samples_leaf,
        } => {
            let w = mean_one(w);
            let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
            let ones = vec![1.0; y.len()];
            let crit = Newton {
                grad: &neg_y,
                hess: &ones,
                weights: &w,
                lambda: 0.0,
            };
            let rows: Vec<usize> = (0..x.n_rows).collect();
            RegressorParams::Tree(grow(x, &rows, &crit, tree_params(max_depth, min_samples_leaf)))
        }
        LearnerSpec::GradientBoostedTrees {
            n_trees,
            learning_rate,
            max_depth,
            min_samples_leaf,
            l2_penalty,
        } => RegressorParams::Boosted(boosting::fit_regression(
            x,
            y,
            w,
            BoostConfig {
                n_trees,
                learning_rate,
                lambda: l2_penalty,
                tree: tree_params(max_depth, min_samples_leaf),
            },
        )),
        LearnerSpec::Knn { k } => RegressorParams::Knn(KnnParams::new(x, y, w, k)),
        LearnerSpec::Logistic { .. } => {
            return Err(Error::arg("logistic is a classifier family; use fit_classifier"))
        }
    })
}

impl RegressorParams {
    pub(crate) fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            RegressorParams::Linear(p) => p.eval(row),
            RegressorParams::Tree(t) => t.predict(row)[0],
            RegressorParams::Boosted(b) => b.raw_scores(row)[0],
            RegressorParams::Knn(k) => k.predict_mean(row),
        }
    }
}

impl FittedRegressor {
    pub fn predict(&self, features: &Table) -> Result<Vec<f64>> {
        let x = self.feature_schema.encode(features)?;
        Ok(self.predict_matrix(&x))
    }

    pub(crate) fn predict_matrix(&self, x: &DenseMatrix) -> Vec<f64> {
        (0..x.n_rows).map(|i| self.parameters.predict_row(x.row(i))).collect()
    }

    /// Training-rows predictions of a boosted model after each round; used
    /// to check that training loss never increases.
    pub fn staged_predict(&self, features: &Table) -> Result<Vec<Vec<f64>>> {
        let RegressorParams::Boosted(b) = &self.parameters else {
            return Err(Error::arg("staged prediction needs a boosted model"));
        };
        let x = self.feature_schema.encode(features)?;
        Ok((0..=b.trees.len())
            .map(|m| (0..x.n_rows).map(|i| b.raw_scores_truncated(x.row(i), m)[0]).collect())
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        check_version(m.format_version)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}

impl Predictor for FittedRegressor {
    fn predict_values(&self, features: &Table) -> Result<Vec<f64>> {
        self.predict(features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ClassifierParams {
    /// Only one class carried weight.
    Constant,
    /// One linear score per class (one-vs-rest), or a single score for the
    /// second class in the binary logistic case.
    Linear { logistic: bool, scores: Vec<LinearParams> },
    Tree(Tree),
    Boosted(BoostedParams),
    Knn(KnnParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    pub format_version: u32,
    pub family: String,
    pub hyperparameters: LearnerSpec,
    /// Class labels in ascending order; score `k` belongs to `labels[k]`.
    pub labels: Vec<usize>,
    pub parameters: ClassifierParams,
    pub feature_schema: FeatureSchema,
}

/// Fit a weighted classifier. Classes with zero total weight are dropped.
pub fn fit_classifier(
    spec: &LearnerSpec,
    features: &Table,
    labels: &[usize],
    weights: Option<&[f64]>,
) -> Result<FittedClassifier> {
    spec.validate()?;
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::arg("cannot fit on empty data"));
    }
    if labels.len() != n {
        return Err(Error::arg(format!("{} labels for {n} rows", labels.len())));
    }
    let w = check_weights(n, weights)?;
    let schema = FeatureSchema::from_table(features);
    let x = schema.encode(features)?;
    let (classes, parameters) = fit_classifier_matrix(spec, &x, labels, &w)?;
    Ok(FittedClassifier {
        format_version: MODEL_FORMAT_VERSION,
        family: spec.family_name().to_string(),
        hyperparameters: spec.clone(),
        labels: classes,
        parameters,
        feature_schema: schema,
    })
}

pub(crate) fn fit_classifier_matrix(
    spec: &LearnerSpec,
    x: &DenseMatrix,
    labels: &[usize],
    w: &[f64],
) -> Result<(Vec<usize>, ClassifierParams)> {
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    let mut classes = Vec::new();
    for &c in &present {
        let total: f64 = labels.iter().zip(w).filter(|(l, _)| **l == c).map(|(_, w)| *w).sum();
        if total > 0.0 {
            classes.push(c);
        } else {
            warn!("class {c} has zero total weight and is dropped");
        }
    }
    if classes.len() < 2 {
        return Ok((classes, ClassifierParams::Constant));
    }
    // Keep only rows of surviving classes; map labels to dense indices.
    let keep: Vec<usize> = (0..labels.len())
        .filter(|&i| classes.binary_search(&labels[i]).is_ok())
        .collect();
    let xk = if keep.len() == labels.len() {
        x.clone()
    } else {
        let mut m = DenseMatrix::zeros(keep.len(), x.n_cols);
        for (r, &i) in keep.iter().enumerate() {
            m.data[r * x.n_cols..(r + 1) * x.n_cols].copy_from_slice(x.row(i));
        }
        m
    };
    let dense: Vec<usize> = keep.iter().map(|&i| classes.binary_search(&labels[i]).unwrap()).collect();
    let wk: Vec<f64> = keep.iter().map(|&i| w[i]).collect();
    let k = classes.len();
    let indicator = |c: usize| -> Vec<f64> { dense.iter().map(|&d| if d == c { 1.0 } else { 0.0 }).collect() };
    let params = match *spec {
        LearnerSpec::RidgeLinear { l2_penalty } => ClassifierParams::Linear {
            logistic: false,
            scores: (0..k)
                .map(|c| fit_ridge(&xk, &indicator(c), &wk, l2_penalty))
                .collect::<Result<_>>()?,
        },
        LearnerSpec::Logistic { l2_penalty, max_iter } => {
            let targets: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
            ClassifierParams::Linear {
                logistic: true,
                scores: targets
                    .into_iter()
                    .map(|c| fit_logistic(&xk, &indicator(c), &wk, l2_penalty, max_iter))
                    .collect::<Result<_>>()?,
            }
        }
        LearnerSpec::CartTree {
            max_depth,
            min_samples_leaf,
        } => {
            let wm = mean_one(&wk);
            let crit = Gini {
                labels: &dense,
                weights: &wm,
                n_classes: k,
            };
            let rows: Vec<usize> = (0..xk.n_rows).collect();
            ClassifierParams::Tree(grow(&xk, &rows, &crit, tree_params(max_depth, min_samples_leaf)))
        }
        LearnerSpec::GradientBoostedTrees {
            n_trees,
            learning_rate,
            max_depth,
            min_samples_leaf,
            l2_penalty,
        } => ClassifierParams::Boosted(boosting::fit_classification(
            &xk,
            &dense,
            k,
            &wk,
            BoostConfig {
                n_trees,
                learning_rate,
                lambda: l2_penalty,
                tree: tree_params(max_depth, min_samples_leaf),
            },
        )),
        LearnerSpec::Knn { k: kk } => {
            let t: Vec<f64> = dense.iter().map(|&d| d as f64).collect();
            ClassifierParams::Knn(KnnParams::new(&xk, &t, &wk, kk))
        }
    };
    Ok((classes, params))
}

impl ClassifierParams {
    /// One finite score per class; larger means more likely.
    pub(crate) fn scores_row(&self, row: &[f64], n_classes: usize) -> Vec<f64> {
        match self {
            ClassifierParams::Constant => vec![1.0; n_classes.max(1)],
            ClassifierParams::Linear { logistic, scores } => {
                if *logistic && n_classes == 2 {
                    let p = sigmoid(scores[0].eval(row));
                    vec![1.0 - p, p]
                } else if *logistic {
                    scores.iter().map(|s| sigmoid(s.eval(row))).collect()
                } else {
                    scores.iter().map(|s| s.eval(row)).collect()
                }
            }
            ClassifierParams::Tree(t) => t.predict(row).to_vec(),
            ClassifierParams::Boosted(b) => {
                let s = b.raw_scores(row);
                if n_classes == 2 {
                    let p = sigmoid(s[0]);
                    vec![1.0 - p, p]
                } else {
                    boosting::softmax(&s)
                }
            }
            ClassifierParams::Knn(kn) => kn.predict_shares(row, n_classes),
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

impl FittedClassifier {
    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    /// Per-row class scores, columns aligned with [`Self::labels`].
    pub fn predict_scores(&self, features: &Table) -> Result<Vec<Vec<f64>>> {
        let x = self.feature_schema.encode(features)?;
        Ok(self.scores_matrix(&x))
    }

    pub(crate) fn scores_matrix(&self, x: &DenseMatrix) -> Vec<Vec<f64>> {
        let k = self.n_classes();
        (0..x.n_rows).map(|i| self.parameters.scores_row(x.row(i), k)).collect()
    }

    pub fn predict(&self, features: &Table) -> Result<Vec<usize>> {
        let x = self.feature_schema.encode(features)?;
        Ok(self.predict_matrix(&x))
    }

    pub(crate) fn predict_matrix(&self, x: &DenseMatrix) -> Vec<usize> {
        if self.labels.len() == 1 {
            return vec![self.labels[0]; x.n_rows];
        }
        let k = self.n_classes();
        (0..x.n_rows)
            .map(|i| self.labels[argmax(&self.parameters.scores_row(x.row(i), k))])
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        check_version(m.format_version)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}

impl Predictor for FittedClassifier {
    fn predict_values(&self, features: &Table) -> Result<Vec<f64>> {
        Ok(self.predict(features)?.into_iter().map(|c| c as f64).collect())
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != MODEL_FORMAT_VERSION {
        return Err(Error::schema(format!(
            "unsupported model format_version {v} (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    Ok(())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
