use serde::{Deserialize, Serialize};

use super::index::r_squared;
use crate::data::{ExperimentalDataset, HistoricalDataset, Table};
use crate::error::{Error, Result};
use crate::learners::{fit_regressor, LearnerSpec};
use crate::scalar::Scalar;

/// Bound on the ATE bias of the surrogate index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasBoundReport {
    pub var_y: f64,
    pub var_a: f64,
    pub r2_y_given_s: f64,
    pub r2_a_given_s: f64,
    pub bound: f64,
    /// The R² terms come from unpenalized linear regressions.
    pub r2_model: String,
}

/// `sqrt(var_y / var_a * (1 - r2_y) * (1 - r2_a))`, with the R² terms clamped
/// to [0, 1].
pub fn bias_bound<T: Scalar>(var_y: T, var_a: T, r2_y: T, r2_a: T) -> T {
    let one = T::one();
    let clamp = |r: T| r.max(T::zero()).min(one);
    let v = var_y / var_a * (one - clamp(r2_y)) * (one - clamp(r2_a));
    v.max(T::zero()).sqrt()
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// In-sample R² of an unpenalized linear regression of `target` on `table`.
pub fn linear_r2(table: &Table, target: &[f64]) -> Result<f64> {
    let m = fit_regressor(&LearnerSpec::ridge(0.0), table, target, None)?;
    Ok(r_squared(target, &m.predict(table)?))
}

/// Marginal ATE bias bound for a binary experiment. `Y` variance and its R²
/// on `(S, X)` come from the historical data; the action's come from the
/// experiment.
pub fn ate_bias_bound(historical: &HistoricalDataset, experiment: &ExperimentalDataset) -> Result<BiasBoundReport> {
    if experiment.n_actions() != 2 {
        return Err(Error::arg("the ATE bias bound needs a binary experiment"));
    }
    let a: Vec<f64> = experiment.actions().iter().map(|&a| a as f64).collect();
    let var_a = variance(&a);
    if var_a <= 0.0 {
        return Err(Error::Data("every unit received the same action; the bound is undefined".into()));
    }
    let y = historical.outcomes();
    let var_y = variance(y);
    let hist_design = historical.surrogates().hstack(historical.features())?;
    let exp_design = experiment.surrogates().hstack(experiment.features())?;
    let r2_y = if var_y > 0.0 { linear_r2(&hist_design, y)? } else { 1.0 };
    let r2_a = linear_r2(&exp_design, &a)?;
    Ok(BiasBoundReport {
        var_y,
        var_a,
        r2_y_given_s: r2_y,
        r2_a_given_s: r2_a,
        bound: bias_bound(var_y, var_a, r2_y, r2_a),
        r2_model: "linear".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_cases() {
        assert!((bias_bound(4.0, 0.25, 0.75, 0.96) - 0.4_f64).abs() < 1e-12);
        assert!((bias_bound(4.0_f32, 0.25, 0.75, 0.96) - 0.4).abs() < 1e-5);
        assert_eq!(bias_bound(4.0, 0.25, 1.0, 0.3), 0.0);
        assert_eq!(bias_bound(4.0, 0.25, 0.2, 1.0), 0.0);
    }

    #[test]
    fn degenerate_action_is_an_error() {
        let t = Table::from_floats(vec![("x", vec![0.0, 1.0, 2.0])]).unwrap();
        let s = Table::from_floats(vec![("s", vec![0.0, 1.0, 3.0])]).unwrap();
        let exp = ExperimentalDataset::new(t.clone(), vec![1, 1, 1], s.clone(), vec![vec![0.5, 0.5]; 3], 2).unwrap();
        let hist = HistoricalDataset::new(t, s, vec![1.0, 2.0, 0.0]).unwrap();
        assert!(ate_bias_bound(&hist, &exp).is_err());
    }
}
