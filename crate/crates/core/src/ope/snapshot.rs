use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Deterministic,
    Stochastic,
}

/// A policy evaluated on a fixed set of units: one probability row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot<T: Scalar = f64> {
    kind: SnapshotKind,
    /// Row-major `n_units x n_actions`.
    probs: Vec<T>,
    n_actions: usize,
}

impl<T: Scalar> PolicySnapshot<T> {
    /// One-hot rows from an action per unit.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![T::zero(); actions.len() * n_actions];
        for (i, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::arg(format!("unit {i}: action {a} outside 0..{n_actions}")));
            }
            probs[i * n_actions + a] = T::one();
        }
        Ok(Self {
            kind: SnapshotKind::Deterministic,
            probs,
            n_actions,
        })
    }

    /// Every unit gets `action`.
    pub fn constant(n_units: usize, n_actions: usize, action: usize) -> Result<Self> {
        Self::deterministic(&vec![action; n_units], n_actions)
    }

    /// Rows must be probability vectors of equal length.
    pub fn stochastic(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_actions = rows.first().map(Vec::len).unwrap_or(0);
        let tol = T::row_sum_tolerance();
        let mut probs = Vec::with_capacity(rows.len() * n_actions);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::arg(format!("row {i} has {} entries, expected {n_actions}", row.len())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= T::zero() && *p <= T::one())) {
                return Err(Error::arg(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::arg(format!("row {i} sums to {s}, not 1")));
            }
            probs.extend_from_slice(row);
        }
        Ok(Self {
            kind: SnapshotKind::Stochastic,
            probs,
            n_actions,
        })
    }

    pub fn uniform(n_units: usize, n_actions: usize) -> Result<Self> {
        let p = T::one() / T::of_usize(n_actions);
        Self::stochastic(vec![vec![p; n_actions]; n_units])
    }

    pub fn kind(&self) -> SnapshotKind {
        self.kind
    }

    pub fn n_units(&self) -> usize {
        if self.n_actions == 0 {
            0
        } else {
            self.probs.len() / self.n_actions
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, unit: usize, action: usize) -> T {
        self.probs[unit * self.n_actions + action]
    }

    pub fn row(&self, unit: usize) -> &[T] {
        &self.probs[unit * self.n_actions..(unit + 1) * self.n_actions]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.n_units()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Most likely action per unit (lowest id on ties).
    pub fn modal_actions(&self) -> Vec<usize> {
        (0..self.n_units())
            .map(|i| {
                let r = self.row(i);
                let mut best = 0;
                for a in 1..r.len() {
                    if r[a] > r[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        let mut probs = Vec::with_capacity(rows.len() * self.n_actions);
        for &i in rows {
            probs.extend_from_slice(self.row(i));
        }
        Self {
            kind: self.kind,
            probs,
            n_actions: self.n_actions,
        }
    }

    pub fn cast<U: Scalar>(&self) -> PolicySnapshot<U> {
        PolicySnapshot {
            kind: self.kind,
            probs: self.probs.iter().map(|p| U::of(p.as_f64())).collect(),
            n_actions: self.n_actions,
        }
    }
}
