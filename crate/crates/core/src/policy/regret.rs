use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport<T: Scalar = f64> {
    pub mean_regret: T,
    pub disagreement_rate: T,
    pub per_unit_loss: Vec<T>,
}

/// Mean loss from taking `policy_actions` instead of `oracle_actions`.
///
/// `effects[i][a]` is unit `i`'s true effect of action `a` relative to any
/// fixed reference (typically control, with `effects[i][0] = 0`), so the
/// loss is `effects[i][a*] - effects[i][a]`, zero where the actions agree.
pub fn regret<T: Scalar>(
    effects: &[Vec<T>],
    policy_actions: &[usize],
    oracle_actions: &[usize],
) -> Result<RegretReport<T>> {
    let n = effects.len();
    if policy_actions.len() != n || oracle_actions.len() != n {
        return Err(Error::arg(format!(
            "length mismatch: {n} effect rows, {} policy actions, {} oracle actions",
            policy_actions.len(),
            oracle_actions.len()
        )));
    }
    let mut loss = Vec::with_capacity(n);
    let mut disagree = 0usize;
    for i in 0..n {
        let (p, o) = (policy_actions[i], oracle_actions[i]);
        let k = effects[i].len();
        if p >= k || o >= k {
            return Err(Error::arg(format!("unit {i}: action outside 0..{k}")));
        }
        if p == o {
            loss.push(T::zero());
        } else {
            disagree += 1;
            loss.push(effects[i][o] - effects[i][p]);
        }
    }
    let nn = T::of_usize(n.max(1));
    Ok(RegretReport {
        mean_regret: loss.iter().copied().sum::<T>() / nn,
        disagreement_rate: T::of_usize(disagree) / nn,
        per_unit_loss: loss,
    })
}

/// `mean_i (b_i - |tau_i|)_+`: the most a sign error driven by surrogate
/// bias at most `b_i` can cost, given the index effect `tau_i`.
pub fn regret_bound<T: Scalar>(bias_bounds: &[T], index_effects: &[T]) -> Result<T> {
    if bias_bounds.len() != index_effects.len() {
        return Err(Error::arg("bias bounds and effects differ in length"));
    }
    let n = T::of_usize(bias_bounds.len().max(1));
    Ok(bias_bounds
        .iter()
        .zip(index_effects)
        .map(|(b, t)| (*b - t.abs()).max(T::zero()))
        .sum::<T>()
        / n)
}
