use crate::data::{ExperimentalDataset, FoldAssignment, Table};
use crate::error::{Error, Result};
use crate::learners::{fit_regressor, LearnerSpec};
use crate::ope::OutcomePredictions;
use crate::scalar::Scalar;

/// Per-unit, per-action doubly-robust scores, row-major `N x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrScoreMatrix<T: Scalar = f64> {
    scores: Vec<T>,
    n_actions: usize,
    /// Folds of the outcome model that produced the scores, if known.
    pub folds: Option<FoldAssignment>,
}

impl<T: Scalar> DrScoreMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if k < 2 {
            return Err(Error::arg("score matrix needs at least two actions"));
        }
        let mut scores = Vec::with_capacity(rows.len() * k);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::arg(format!("score row {i} has {} entries, expected {k}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("score row {i} is not finite")));
            }
            scores.extend_from_slice(r);
        }
        Ok(Self {
            scores,
            n_actions: k,
            folds: None,
        })
    }

    pub fn n_units(&self) -> usize {
        self.scores.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, unit: usize, action: usize) -> T {
        self.scores[unit * self.n_actions + action]
    }

    pub fn row(&self, unit: usize) -> &[T] {
        &self.scores[unit * self.n_actions..(unit + 1) * self.n_actions]
    }

    /// Score column of one action.
    pub fn column(&self, action: usize) -> Vec<T> {
        (0..self.n_units()).map(|i| self.get(i, action)).collect()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        let mut scores = Vec::with_capacity(rows.len() * self.n_actions);
        for &i in rows {
            scores.extend_from_slice(self.row(i));
        }
        Self {
            scores,
            n_actions: self.n_actions,
            folds: None,
        }
    }
}

/// `gamma_a(X_i) = mu(X_i, a) + 1{A_i = a} (y_i - mu(X_i, a)) / pi_D(a | X_i)`.
pub fn dr_scores<T: Scalar>(
    exp: &ExperimentalDataset,
    outcomes: &[T],
    mu: &OutcomePredictions<T>,
) -> Result<DrScoreMatrix<T>> {
    let n = exp.n_units();
    let k = exp.n_actions();
    if outcomes.len() != n {
        return Err(Error::arg(format!("{} outcomes for {n} units", outcomes.len())));
    }
    if mu.n_units() != n || mu.n_actions() != k {
        return Err(Error::arg("outcome predictions do not match the dataset shape"));
    }
    let mut scores = Vec::with_capacity(n * k);
    for i in 0..n {
        let obs = exp.actions()[i];
        for a in 0..k {
            let m = mu.get(i, a);
            let s = if a == obs {
                let p = exp.propensity(i, a);
                if p <= 0.0 {
                    return Err(Error::Positivity {
                        unit: i,
                        probability: p,
                    });
                }
                m + (outcomes[i] - m) / T::of(p)
            } else {
                m
            };
            if !s.is_finite() {
                return Err(Error::Numeric(format!("score for unit {i}, action {a} is not finite")));
            }
            scores.push(s);
        }
    }
    Ok(DrScoreMatrix {
        scores,
        n_actions: k,
        folds: None,
    })
}

/// Effects relative to control, `N x K` with column 0 identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CateEstimate<T: Scalar = f64> {
    pub values: Vec<Vec<T>>,
    pub smoothed: bool,
}

impl<T: Scalar> CateEstimate<T> {
    /// Effect of `action` relative to control for every unit.
    pub fn column(&self, action: usize) -> Vec<T> {
        self.values.iter().map(|r| r[action]).collect()
    }
}

/// Raw per-unit differences `gamma_a - gamma_0`, optionally replaced by the
/// fitted values of a regression of those differences on `X`.
pub fn cate<T: Scalar>(scores: &DrScoreMatrix<T>, smoother: Option<(&LearnerSpec, &Table)>) -> Result<CateEstimate<T>> {
    let n = scores.n_units();
    let k = scores.n_actions();
    let mut values: Vec<Vec<T>> = (0..n)
        .map(|i| (0..k).map(|a| scores.get(i, a) - scores.get(i, 0)).collect())
        .collect();
    let smoothed = if let Some((spec, features)) = smoother {
        if features.n_rows() != n {
            return Err(Error::arg("smoother features and scores differ in length"));
        }
        for a in 1..k {
            let raw: Vec<f64> = values.iter().map(|r| r[a].as_f64()).collect();
            let m = fit_regressor(spec, features, &raw, None)?;
            for (row, v) in values.iter_mut().zip(m.predict(features)?) {
                row[a] = T::of(v);
            }
        }
        true
    } else {
        false
    };
    Ok(CateEstimate { values, smoothed })
}
