use serde::{Deserialize, Serialize};

use super::estimators::{EstimatorKind, ValueEstimate};
use crate::data::ExperimentalDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    Ate,
    Att,
}

/// Inverse-propensity-weighted contrast of action `a` against `a_prime`.
///
/// ATE: each arm's mean uses weights `1 / pi_D(arm | X)`, normalized within
/// the arm. ATT: treated units (`a`) get weight 1 and comparison units get
/// `pi_D(a | X) / pi_D(a' | X)`, again normalized within the arm. The
/// estimate carries no standard error; use the bootstrap for intervals.
pub fn estimate_ate_att<T: Scalar>(
    exp: &ExperimentalDataset,
    outcomes: &[T],
    contrast: (usize, usize),
    estimand: Estimand,
) -> Result<ValueEstimate<T>> {
    let (a, b) = contrast;
    let k = exp.n_actions();
    if a >= k || b >= k || a == b {
        return Err(Error::arg(format!("invalid contrast ({a}, {b}) for {k} actions")));
    }
    if outcomes.len() != exp.n_units() {
        return Err(Error::arg("outcomes and dataset differ in length"));
    }
    let (mut s_a, mut w_a, mut s_b, mut w_b) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (i, &act) in exp.actions().iter().enumerate() {
        if act != a && act != b {
            continue;
        }
        let p_obs = exp.propensity(i, act);
        if p_obs <= 0.0 {
            return Err(Error::Positivity {
                unit: i,
                probability: p_obs,
            });
        }
        let w = match (estimand, act == a) {
            (Estimand::Ate, _) => 1.0 / p_obs,
            (Estimand::Att, true) => 1.0,
            (Estimand::Att, false) => exp.propensity(i, a) / p_obs,
        };
        let w = T::of(w);
        if act == a {
            s_a = s_a + w * outcomes[i];
            w_a = w_a + w;
        } else {
            s_b = s_b + w * outcomes[i];
            w_b = w_b + w;
        }
    }
    if w_a <= T::zero() || w_b <= T::zero() {
        return Err(Error::Data(format!("contrast ({a}, {b}) needs units in both arms")));
    }
    let n = T::of_usize(exp.actions().iter().filter(|&&x| x == a || x == b).count());
    Ok(ValueEstimate::point_only(EstimatorKind::Hajek, s_a / w_a - s_b / w_b, n))
}
