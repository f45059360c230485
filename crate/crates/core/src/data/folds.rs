use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Random balanced partition of units into folds for cross-fitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of_unit: Vec<usize>,
    n_folds: usize,
    seed: u64,
}

/// Shuffle unit indices with the seeded RNG and deal them round-robin.
pub fn make_folds(n_units: usize, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::arg(format!("n_folds must be at least 2, got {n_folds}")));
    }
    if n_folds > n_units {
        return Err(Error::arg(format!(
            "n_folds ({n_folds}) exceeds the number of units ({n_units})"
        )));
    }
    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut fold_of_unit = vec![0; n_units];
    for (pos, &unit) in order.iter().enumerate() {
        fold_of_unit[unit] = pos % n_folds;
    }
    Ok(FoldAssignment {
        fold_of_unit,
        n_folds,
        seed,
    })
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn n_units(&self) -> usize {
        self.fold_of_unit.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, unit: usize) -> usize {
        self.fold_of_unit[unit]
    }

    pub fn fold_of_unit(&self) -> &[usize] {
        &self.fold_of_unit
    }

    /// Units in `fold`, ascending.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.fold_of_unit[i] == fold).collect()
    }

    /// Units outside `fold`, ascending.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.fold_of_unit[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_folds];
        for &f in &self.fold_of_unit {
            s[f] += 1;
        }
        s
    }
}

/// Seeded train/test split. Returns `(train, test)` index lists, ascending.
pub fn train_test_split(n_units: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::arg(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let n_test = ((n_units as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n_units {
        return Err(Error::arg("split leaves an empty train or test set"));
    }
    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
