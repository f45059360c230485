use serde::{Deserialize, Serialize};

use super::outcome_model::OutcomePredictions;
use super::snapshot::PolicySnapshot;
use crate::data::ExperimentalDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ht,
    Hajek,
    Dr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate<T: Scalar = f64> {
    pub estimator: EstimatorKind,
    pub point: T,
    pub std_error: Option<T>,
    pub ci_low: Option<T>,
    pub ci_high: Option<T>,
    pub n_effective: T,
}

impl<T: Scalar> ValueEstimate<T> {
    pub(crate) fn point_only(estimator: EstimatorKind, point: T, n_effective: T) -> Self {
        Self {
            estimator,
            point,
            std_error: None,
            ci_low: None,
            ci_high: None,
            n_effective,
        }
    }
}

fn check_lengths<T: Scalar>(exp: &ExperimentalDataset, outcomes: &[T], target: &PolicySnapshot<T>) -> Result<()> {
    let n = exp.n_units();
    if outcomes.len() != n {
        return Err(Error::arg(format!("{} outcomes for {n} units", outcomes.len())));
    }
    if target.n_units() != n || target.n_actions() != exp.n_actions() {
        return Err(Error::arg(format!(
            "policy snapshot is {}x{}, data is {n}x{}",
            target.n_units(),
            target.n_actions(),
            exp.n_actions()
        )));
    }
    if let Some(i) = outcomes.iter().position(|y| !y.is_finite()) {
        return Err(Error::arg(format!("outcome {i} is not finite")));
    }
    Ok(())
}

/// `w_i = pi_P(A_i | X_i) / pi_D(A_i | X_i)`.
pub fn importance_weights<T: Scalar>(exp: &ExperimentalDataset, target: &PolicySnapshot<T>) -> Result<Vec<T>> {
    exp.actions()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let pd = exp.propensity(i, a);
            if pd <= 0.0 || !pd.is_finite() {
                return Err(Error::Positivity {
                    unit: i,
                    probability: pd,
                });
            }
            Ok(target.prob(i, a) / T::of(pd))
        })
        .collect()
}

pub(crate) fn effective_n<T: Scalar>(w: &[T]) -> T {
    let s: T = w.iter().copied().sum();
    let s2: T = w.iter().map(|v| *v * *v).sum();
    if s2 > T::zero() {
        s * s / s2
    } else {
        T::zero()
    }
}

/// Unnormalized importance-weighted mean `(1/N) sum w_i y_i`.
pub fn value_ht<T: Scalar>(exp: &ExperimentalDataset, outcomes: &[T], target: &PolicySnapshot<T>) -> Result<ValueEstimate<T>> {
    check_lengths(exp, outcomes, target)?;
    let w = importance_weights(exp, target)?;
    let n = T::of_usize(outcomes.len().max(1));
    let total: T = w.iter().zip(outcomes).map(|(w, y)| *w * *y).sum();
    if w.iter().all(|v| *v == T::zero()) {
        log::warn!("target policy puts zero probability on every observed action");
    }
    Ok(ValueEstimate::point_only(EstimatorKind::Ht, total / n, effective_n(&w)))
}

/// Self-normalized importance-weighted mean `sum w_i y_i / sum w_i`.
pub fn value_hajek<T: Scalar>(
    exp: &ExperimentalDataset,
    outcomes: &[T],
    target: &PolicySnapshot<T>,
) -> Result<ValueEstimate<T>> {
    check_lengths(exp, outcomes, target)?;
    let w = importance_weights(exp, target)?;
    let sw: T = w.iter().copied().sum();
    if sw <= T::zero() {
        return Err(Error::NoOverlap(
            "target policy gives zero probability to every observed action".into(),
        ));
    }
    let total: T = w.iter().zip(outcomes).map(|(w, y)| *w * *y).sum();
    Ok(ValueEstimate::point_only(EstimatorKind::Hajek, total / sw, effective_n(&w)))
}

/// Per-unit terms of the doubly-robust value:
/// `sum_a pi_P(a|X_i) mu(X_i, a) + w_i (y_i - mu(X_i, A_i))`.
pub fn dr_contributions<T: Scalar>(
    exp: &ExperimentalDataset,
    outcomes: &[T],
    target: &PolicySnapshot<T>,
    mu: &OutcomePredictions<T>,
) -> Result<Vec<T>> {
    check_lengths(exp, outcomes, target)?;
    if mu.n_units() != exp.n_units() || mu.n_actions() != exp.n_actions() {
        return Err(Error::arg("outcome predictions do not match the dataset shape"));
    }
    let w = importance_weights(exp, target)?;
    let k = exp.n_actions();
    Ok((0..exp.n_units())
        .map(|i| {
            let model: T = (0..k).map(|a| target.prob(i, a) * mu.get(i, a)).sum();
            let a = exp.actions()[i];
            model + w[i] * (outcomes[i] - mu.get(i, a))
        })
        .collect())
}

pub fn value_dr<T: Scalar>(
    exp: &ExperimentalDataset,
    outcomes: &[T],
    target: &PolicySnapshot<T>,
    mu: &OutcomePredictions<T>,
) -> Result<ValueEstimate<T>> {
    let c = dr_contributions(exp, outcomes, target, mu)?;
    let n = T::of_usize(c.len().max(1));
    let w = importance_weights(exp, target)?;
    Ok(ValueEstimate::point_only(
        EstimatorKind::Dr,
        c.iter().copied().sum::<T>() / n,
        effective_n(&w),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Table;

    fn two_units(actions: Vec<usize>, p_obs: [f64; 2]) -> ExperimentalDataset {
        let props = actions
            .iter()
            .zip(p_obs)
            .map(|(&a, p)| if a == 0 { vec![p, 1.0 - p] } else { vec![1.0 - p, p] })
            .collect();
        ExperimentalDataset::new(Table::empty(2), actions, Table::empty(2), props, 2).unwrap()
    }

    #[test]
    fn worked_two_unit_values() {
        let exp = two_units(vec![1, 0], [0.5, 0.25]);
        let y = [10.0_f64, 20.0];
        let target = PolicySnapshot::deterministic(&[1, 0], 2).unwrap();
        assert_eq!(value_ht(&exp, &y, &target).unwrap().point, 50.0);
        let h = value_hajek(&exp, &y, &target).unwrap().point;
        assert!((h - 100.0 / 6.0).abs() < 1e-12);
        let only_first = PolicySnapshot::deterministic(&[1, 1], 2).unwrap();
        assert_eq!(value_hajek(&exp, &y, &only_first).unwrap().point, 10.0);
        let none = PolicySnapshot::deterministic(&[0, 1], 2).unwrap();
        assert!(matches!(value_hajek(&exp, &y, &none), Err(Error::NoOverlap(_))));
        let ht = value_ht(&exp, &y, &none).unwrap();
        assert_eq!((ht.point, ht.n_effective), (0.0, 0.0));
    }

    #[test]
    fn dr_worked_case_and_reduction() {
        // Unit 1: A=1, pi_D=0.25, pi_P=(0.5,0.5) so w=2, mu(x,pi_P)=(10+8)/2=9,
        // mu(x,A)=8. Unit 2: A=0, target always 1 so w=0, mu(x,pi_P)=18.
        let exp = ExperimentalDataset::new(
            Table::empty(2),
            vec![1, 0],
            Table::empty(2),
            vec![vec![0.75, 0.25], vec![0.5, 0.5]],
            2,
        )
        .unwrap();
        let y = [10.0_f64, 20.0];
        let target = PolicySnapshot::stochastic(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let mu = OutcomePredictions::new(vec![10.0, 8.0, 5.0, 18.0], 2).unwrap();
        let v = value_dr(&exp, &y, &target, &mu).unwrap().point;
        assert!((v - 15.5).abs() < 1e-12);
        let zero = OutcomePredictions::new(vec![0.0; 4], 2).unwrap();
        let dr = value_dr(&exp, &y, &target, &zero).unwrap().point;
        assert_eq!(dr, value_ht(&exp, &y, &target).unwrap().point);
    }
}
