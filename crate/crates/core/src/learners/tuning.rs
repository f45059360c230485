//! Cross-validated choice among candidate learner specs.

use rayon::prelude::*;

use super::design::{DenseMatrix, FeatureSchema};
use super::model::fit_regressor_matrix;
use super::spec::LearnerSpec;
use crate::data::{make_folds, Table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best: LearnerSpec,
    /// Mean weighted validation MSE for each candidate, in grid order.
    pub losses: Vec<f64>,
}

fn take_rows(x: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows.len(), x.n_cols);
    for (r, &i) in rows.iter().enumerate() {
        m.data[r * x.n_cols..(r + 1) * x.n_cols].copy_from_slice(x.row(i));
    }
    m
}

/// Pick the regressor spec with the smallest mean validation MSE over
/// `n_folds` folds. Losses within a relative 1e-12 count as ties, which go
/// to the simpler spec (see [`LearnerSpec::complexity_key`]).
pub fn select_regressor(
    grid: &[LearnerSpec],
    features: &Table,
    targets: &[f64],
    weights: Option<&[f64]>,
    n_folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::arg("empty candidate grid"));
    }
    let n = features.n_rows();
    let folds = make_folds(n, n_folds, seed)?;
    let x = FeatureSchema::from_table(features).encode(features)?;
    let w = weights.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; n]);
    let losses = grid
        .par_iter()
        .map(|spec| {
            let mut total = 0.0;
            for f in 0..n_folds {
                let train = folds.complement(f);
                let test = folds.members(f);
                let xt = take_rows(&x, &train);
                let yt: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
                let wt: Vec<f64> = train.iter().map(|&i| w[i]).collect();
                let params = fit_regressor_matrix(spec, &xt, &yt, &wt)?;
                let mut se = 0.0;
                let mut ws = 0.0;
                for &i in &test {
                    let r = params.predict_row(x.row(i)) - targets[i];
                    se += w[i] * r * r;
                    ws += w[i];
                }
                total += if ws > 0.0 { se / ws } else { 0.0 };
            }
            Ok(total / n_folds as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        let tol = 1e-12 * losses[best].abs().max(1e-300);
        let better = losses[i] < losses[best] - tol;
        let tie = (losses[i] - losses[best]).abs() <= tol;
        let simpler = grid[i]
            .complexity_key()
            .partial_cmp(&grid[best].complexity_key())
            .is_some_and(|o| o.is_lt());
        if better || (tie && simpler) {
            best = i;
        }
    }
    Ok(CvResult {
        best: grid[best].clone(),
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_data_prefers_small_penalty_and_ties_go_simple() {
        let x: Vec<f64> = (0..60).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v).collect();
        let t = Table::from_floats(vec![("x", x)]).unwrap();
        let grid = [LearnerSpec::ridge(10.0), LearnerSpec::ridge(0.0)];
        let r = select_regressor(&grid, &t, &y, None, 3, 4).unwrap();
        assert_eq!(r.best, LearnerSpec::ridge(0.0));

        // Constant target: every penalty fits perfectly, the largest wins.
        let c = vec![3.0; 60];
        let r = select_regressor(&grid, &t, &c, None, 3, 4).unwrap();
        assert_eq!(r.best, LearnerSpec::ridge(10.0));
    }
}
