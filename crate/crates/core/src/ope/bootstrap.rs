use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimators::{dr_contributions, importance_weights, value_dr, value_hajek, value_ht, EstimatorKind, ValueEstimate};
use super::outcome_model::OutcomePredictions;
use super::snapshot::PolicySnapshot;
use crate::data::ExperimentalDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEstimate<T: Scalar = f64> {
    pub estimate: ValueEstimate<T>,
    pub replicates: usize,
    pub dropped_replicates: usize,
}

/// Serialized evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub estimator: EstimatorKind,
    pub point: f64,
    pub ci: Option<[f64; 2]>,
    pub std_error: Option<f64>,
    pub n_effective: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub dropped_replicates: usize,
}

impl<T: Scalar> BootstrapEstimate<T> {
    pub fn report(&self) -> EvaluationReport {
        let e = &self.estimate;
        EvaluationReport {
            estimator: e.estimator,
            point: e.point.as_f64(),
            ci: match (e.ci_low, e.ci_high) {
                (Some(l), Some(h)) => Some([l.as_f64(), h.as_f64()]),
                _ => None,
            },
            std_error: e.std_error.map(Scalar::as_f64),
            n_effective: e.n_effective.as_f64(),
            b: self.replicates,
            dropped_replicates: self.dropped_replicates,
        }
    }
}

/// Linear-interpolation percentile of sorted values.
pub fn percentile<T: Scalar>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + T::of(h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over units resampled with replacement. The outcome
/// model (for DR) is held fixed across replicates; replicate `r` draws from
/// its own seed derived from `seed`, so the result does not depend on
/// scheduling. Hájek replicates with no overlap are dropped and counted.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci<T: Scalar>(
    estimator: EstimatorKind,
    exp: &ExperimentalDataset,
    outcomes: &[T],
    target: &PolicySnapshot<T>,
    mu: Option<&OutcomePredictions<T>>,
    n_replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapEstimate<T>> {
    if n_replicates < 1 {
        return Err(Error::arg("need at least one bootstrap replicate"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::arg(format!("confidence level must be in (0, 1), got {level}")));
    }
    if n_replicates < 100 {
        log::warn!("only {n_replicates} bootstrap replicates; percentile intervals will be coarse");
    }
    let (point, numer, denom): (ValueEstimate<T>, Vec<T>, Option<Vec<T>>) = match estimator {
        EstimatorKind::Ht => {
            let w = importance_weights(exp, target)?;
            let c = w.iter().zip(outcomes).map(|(w, y)| *w * *y).collect();
            (value_ht(exp, outcomes, target)?, c, None)
        }
        EstimatorKind::Hajek => {
            let w = importance_weights(exp, target)?;
            let c = w.iter().zip(outcomes).map(|(w, y)| *w * *y).collect();
            (value_hajek(exp, outcomes, target)?, c, Some(w))
        }
        EstimatorKind::Dr => {
            let mu = mu.ok_or_else(|| Error::arg("the DR estimator needs outcome predictions"))?;
            let c = dr_contributions(exp, outcomes, target, mu)?;
            (value_dr(exp, outcomes, target, mu)?, c, None)
        }
    };
    let n = numer.len();
    let reps: Vec<Option<T>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let mut s = T::zero();
            let mut d = T::zero();
            for _ in 0..n {
                let i = rng.random_range(0..n);
                s = s + numer[i];
                if let Some(w) = &denom {
                    d = d + w[i];
                }
            }
            match &denom {
                Some(_) if d <= T::zero() => None,
                Some(_) => Some(s / d),
                None => Some(s / T::of_usize(n)),
            }
        })
        .collect();
    let mut kept: Vec<T> = reps.iter().flatten().copied().collect();
    let dropped = n_replicates - kept.len();
    if kept.is_empty() {
        return Err(Error::NoOverlap("every bootstrap replicate lacked overlap".into()));
    }
    kept.sort_by(|a, b| a.partial_cmp(b).expect("finite replicate"));
    let alpha = (1.0 - level) / 2.0;
    let p = point.point;
    let lo = percentile(&kept, alpha).min(p);
    let hi = percentile(&kept, 1.0 - alpha).max(p);
    let m = kept.iter().copied().sum::<T>() / T::of_usize(kept.len());
    let sd = if kept.len() > 1 {
        (kept.iter().map(|v| (*v - m) * (*v - m)).sum::<T>() / T::of_usize(kept.len() - 1)).sqrt()
    } else {
        T::zero()
    };
    Ok(BootstrapEstimate {
        estimate: ValueEstimate {
            std_error: Some(sd),
            ci_low: Some(lo),
            ci_high: Some(hi),
            ..point
        },
        replicates: n_replicates,
        dropped_replicates: dropped,
    })
}
