use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::learn::{learn_policy_binary, learn_policy_multi, policy_objective, Policy};
use super::scores::DrScoreMatrix;
use crate::data::{make_folds, Table};
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::scalar::Scalar;

/// Binary or tournament learner, whichever fits the number of actions.
pub fn learn_policy<T: Scalar>(scores: &DrScoreMatrix<T>, features: &Table, classifier: &LearnerSpec) -> Result<Policy> {
    if scores.n_actions() == 2 {
        learn_policy_binary(scores, features, classifier)
    } else {
        learn_policy_multi(scores, features, classifier)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySelection {
    pub best: LearnerSpec,
    /// Cross-validated objective (mean held-out score) per candidate.
    pub objectives: Vec<f64>,
}

/// Choose the classifier whose policies earn the highest held-out score.
///
/// Each fold's policy is learned on the other folds and scored on the fold's
/// own DR scores. Ties go to the earlier candidate.
pub fn select_policy_classifier<T: Scalar>(
    scores: &DrScoreMatrix<T>,
    features: &Table,
    candidates: &[LearnerSpec],
    n_folds: usize,
    seed: u64,
) -> Result<PolicySelection> {
    if candidates.is_empty() {
        return Err(Error::arg("no candidate classifiers"));
    }
    if scores.n_units() != features.n_rows() {
        return Err(Error::arg("scores and features differ in length"));
    }
    let folds = make_folds(scores.n_units(), n_folds, seed)?;
    let objectives = candidates
        .par_iter()
        .map(|spec| {
            spec.validate()?;
            let mut total = 0.0;
            for f in 0..folds.n_folds() {
                let train = folds.complement(f);
                let test = folds.members(f);
                let policy = learn_policy(&scores.take_rows(&train), &features.take_rows(&train), spec)?;
                let actions = policy.actions(&features.take_rows(&test))?;
                total += policy_objective(&scores.take_rows(&test), &actions).as_f64() * test.len() as f64;
            }
            Ok(total / scores.n_units() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in objectives.iter().enumerate() {
        if *v > objectives[best] {
            best = i;
        }
    }
    Ok(PolicySelection {
        best: candidates[best].clone(),
        objectives,
    })
}
