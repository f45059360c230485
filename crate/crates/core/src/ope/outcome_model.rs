use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Column, ColumnKind, ExperimentalDataset, FoldAssignment, Table};
use crate::error::{Error, Result};
use crate::learners::{fit_regressor, FittedRegressor, LearnerSpec};
use crate::scalar::Scalar;

/// `mu(X_i, a)` for every unit and action, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePredictions<T: Scalar = f64> {
    values: Vec<T>,
    n_actions: usize,
}

impl<T: Scalar> OutcomePredictions<T> {
    pub fn new(values: Vec<T>, n_actions: usize) -> Result<Self> {
        if n_actions == 0 || values.len() % n_actions != 0 {
            return Err(Error::arg("prediction matrix is not a whole number of rows"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite outcome prediction".into()));
        }
        Ok(Self { values, n_actions })
    }

    pub fn zeros(n_units: usize, n_actions: usize) -> Self {
        Self {
            values: vec![T::zero(); n_units * n_actions],
            n_actions,
        }
    }

    pub fn n_units(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, unit: usize, action: usize) -> T {
        self.values[unit * self.n_actions + action]
    }

    pub fn row(&self, unit: usize) -> &[T] {
        &self.values[unit * self.n_actions..(unit + 1) * self.n_actions]
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_actions);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            n_actions: self.n_actions,
        }
    }

    pub fn cast<U: Scalar>(&self) -> OutcomePredictions<U> {
        OutcomePredictions {
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            n_actions: self.n_actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModelOptions {
    pub spec: LearnerSpec,
    #[serde(default = "default_folds")]
    pub n_folds: usize,
    /// Add action-by-covariate products so linear models can express
    /// heterogeneous effects.
    #[serde(default = "default_true")]
    pub interactions: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_folds() -> usize {
    3
}

fn default_true() -> bool {
    true
}

impl OutcomeModelOptions {
    pub fn new(spec: LearnerSpec, n_folds: usize, seed: u64) -> Self {
        Self {
            spec,
            n_folds,
            interactions: true,
            seed,
        }
    }
}

/// Per-fold regressors of the outcome on covariates and action indicators.
#[derive(Debug, Clone)]
pub struct CrossFitOutcomeModel {
    folds: FoldAssignment,
    models: Vec<FittedRegressor>,
    n_actions: usize,
    interactions: bool,
    predictions: OutcomePredictions<f64>,
}

fn action_column(a: usize) -> String {
    format!("__action_{a}")
}

/// Covariates plus drop-first action indicators (and their products with
/// numeric covariates when `interactions` is set).
fn augment(features: &Table, actions: &[usize], n_actions: usize, interactions: bool) -> Result<Table> {
    let numeric: Vec<(String, Vec<f64>)> = if interactions {
        features
            .columns()
            .filter(|(_, c)| matches!(c.kind(), ColumnKind::Float | ColumnKind::Int))
            .map(|(n, c)| (n.to_string(), c.as_f64().expect("numeric")))
            .collect()
    } else {
        Vec::new()
    };
    let mut cols: Vec<(String, Column)> = features.columns().map(|(n, c)| (n.to_string(), c.clone())).collect();
    for a in 1..n_actions {
        let ind: Vec<f64> = actions.iter().map(|&x| if x == a { 1.0 } else { 0.0 }).collect();
        for (name, v) in &numeric {
            let prod = v.iter().zip(&ind).map(|(x, d)| x * d).collect();
            cols.push((format!("{}*{name}", action_column(a)), Column::Float(prod)));
        }
        cols.push((action_column(a), Column::Float(ind)));
    }
    Table::new(cols)
}

pub fn fit_crossfit_outcome_model(
    exp: &ExperimentalDataset,
    outcomes: &[f64],
    options: &OutcomeModelOptions,
) -> Result<CrossFitOutcomeModel> {
    let n = exp.n_units();
    if outcomes.len() != n {
        return Err(Error::arg(format!("{} outcomes for {n} units", outcomes.len())));
    }
    let k = exp.n_actions();
    let folds = make_folds(n, options.n_folds, options.seed)?;
    let design = augment(exp.features(), exp.actions(), k, options.interactions)?;
    let results = (0..options.n_folds)
        .into_par_iter()
        .map(|f| {
            let train = folds.complement(f);
            let mut seen = vec![false; k];
            for &i in &train {
                seen[exp.actions()[i]] = true;
            }
            if let Some(a) = seen.iter().position(|s| !s) {
                warn!("fold {f}: training rows contain no unit with action {a}; its predictions extrapolate");
            }
            let y: Vec<f64> = train.iter().map(|&i| outcomes[i]).collect();
            let model = fit_regressor(&options.spec, &design.take_rows(&train), &y, None)?;
            // Out-of-fold predictions for this fold's own members.
            let members = folds.members(f);
            let x = exp.features().take_rows(&members);
            let mut preds = vec![0.0; members.len() * k];
            for a in 0..k {
                let t = augment(&x, &vec![a; members.len()], k, options.interactions)?;
                for (r, p) in model.predict(&t)?.into_iter().enumerate() {
                    preds[r * k + a] = p;
                }
            }
            Ok((model, members, preds))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; n * k];
    let mut models = Vec::with_capacity(results.len());
    for (model, members, preds) in results {
        for (r, &i) in members.iter().enumerate() {
            values[i * k..(i + 1) * k].copy_from_slice(&preds[r * k..(r + 1) * k]);
        }
        models.push(model);
    }
    Ok(CrossFitOutcomeModel {
        folds,
        models,
        n_actions: k,
        interactions: options.interactions,
        predictions: OutcomePredictions::new(values, k)?,
    })
}

impl CrossFitOutcomeModel {
    /// Out-of-fold `mu(X_i, a)` for the units the model was fit on.
    pub fn predictions(&self) -> &OutcomePredictions<f64> {
        &self.predictions
    }

    pub fn folds(&self) -> &FoldAssignment {
        &self.folds
    }

    pub fn models(&self) -> &[FittedRegressor] {
        &self.models
    }

    /// Predictions for new units: the average of the fold models.
    pub fn predict_new(&self, features: &Table) -> Result<OutcomePredictions<f64>> {
        let n = features.n_rows();
        let k = self.n_actions;
        let mut values = vec![0.0; n * k];
        for a in 0..k {
            let t = augment(features, &vec![a; n], k, self.interactions)?;
            for m in &self.models {
                for (i, p) in m.predict(&t)?.into_iter().enumerate() {
                    values[i * k + a] += p / self.models.len() as f64;
                }
            }
        }
        OutcomePredictions::new(values, k)
    }
}
