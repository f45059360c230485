use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::DrScoreMatrix;
use crate::data::{check_same_columns, ColumnSpec, Table};
use crate::error::{Error, Result};
use crate::learners::{fit_classifier, read_text, write_text, FittedClassifier, LearnerSpec};
use crate::ope::PolicySnapshot;
use crate::scalar::Scalar;

pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    DeterministicClassifier,
    StochasticTable,
}

/// Classifier deciding between actions `low` (label 0) and `high` (label 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub low: usize,
    pub high: usize,
    pub classifier: FittedClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyModel {
    /// Same action for everyone.
    Constant { action: usize },
    /// Binary classifier whose predicted label is the action.
    Binary { classifier: FittedClassifier },
    /// One classifier per action pair; majority vote.
    Tournament { pairs: Vec<PairClassifier> },
    /// Fixed probability rows aligned with the units it is applied to.
    Table { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub format_version: u32,
    pub kind: PolicyKind,
    pub action_set: usize,
    pub model: PolicyModel,
    pub feature_schema: Vec<ColumnSpec>,
    pub tie_rule: String,
}

const TIE_RULE: &str = "lowest_action_id";

impl Policy {
    fn deterministic(model: PolicyModel, n_actions: usize, features: &Table) -> Self {
        Self {
            format_version: POLICY_FORMAT_VERSION,
            kind: PolicyKind::DeterministicClassifier,
            action_set: n_actions,
            model,
            feature_schema: features.schema(),
            tie_rule: TIE_RULE.into(),
        }
    }

    pub fn constant(action: usize, n_actions: usize, features: &Table) -> Self {
        Self::deterministic(PolicyModel::Constant { action }, n_actions, features)
    }

    /// Stochastic policy given as per-unit rows.
    pub fn table(snapshot: &PolicySnapshot<f64>) -> Self {
        Self {
            format_version: POLICY_FORMAT_VERSION,
            kind: PolicyKind::StochasticTable,
            action_set: snapshot.n_actions(),
            model: PolicyModel::Table { rows: snapshot.rows() },
            feature_schema: Vec::new(),
            tie_rule: TIE_RULE.into(),
        }
    }

    /// Actions of a deterministic policy.
    pub fn actions(&self, features: &Table) -> Result<Vec<usize>> {
        let n = features.n_rows();
        if !self.feature_schema.is_empty() {
            let names: Vec<&str> = self.feature_schema.iter().map(|c| c.name.as_str()).collect();
            let sub = features
                .select(&names)
                .map_err(|e| Error::schema(format!("policy feature schema mismatch: {e}")))?;
            check_same_columns("policy feature", &self.feature_schema, &sub.schema())?;
        }
        match &self.model {
            PolicyModel::Constant { action } => Ok(vec![*action; n]),
            PolicyModel::Binary { classifier } => classifier.predict(features),
            PolicyModel::Tournament { pairs } => {
                let mut votes = vec![vec![0usize; self.action_set]; n];
                for p in pairs {
                    for (i, w) in p.classifier.predict(features)?.into_iter().enumerate() {
                        votes[i][if w == 1 { p.high } else { p.low }] += 1;
                    }
                }
                Ok(votes.iter().map(|v| vote_winner(v)).collect())
            }
            PolicyModel::Table { .. } => Err(Error::arg("a stochastic policy has no single action per unit")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if p.format_version != POLICY_FORMAT_VERSION {
            return Err(Error::schema(format!("unsupported policy format_version {}", p.format_version)));
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}

/// Most votes; ties go to the lowest action id.
fn vote_winner(votes: &[usize]) -> usize {
    let mut best = 0;
    for (a, v) in votes.iter().enumerate() {
        if *v > votes[best] {
            best = a;
        }
    }
    best
}

/// Evaluate a policy on units: one-hot rows, or stored rows.
pub fn policy_assign(policy: &Policy, features: &Table) -> Result<PolicySnapshot<f64>> {
    match &policy.model {
        PolicyModel::Table { rows } => {
            if rows.len() != features.n_rows() {
                return Err(Error::arg(format!(
                    "stochastic policy has {} rows, data has {}",
                    rows.len(),
                    features.n_rows()
                )));
            }
            PolicySnapshot::stochastic(rows.clone())
        }
        _ => PolicySnapshot::deterministic(&policy.actions(features)?, policy.action_set),
    }
}

/// Mean score of the chosen actions: the empirical policy value.
pub fn policy_objective<T: Scalar>(scores: &DrScoreMatrix<T>, actions: &[usize]) -> T {
    let n = T::of_usize(actions.len().max(1));
    actions.iter().enumerate().map(|(i, &a)| scores.get(i, a)).sum::<T>() / n
}

/// Keep `learned` only if it strictly beats every constant policy on the
/// training objective; otherwise return the best constant (lowest id on
/// ties, so treat-none wins a tie).
fn guard_with_constants(
    scores: &DrScoreMatrix<f64>,
    features: &Table,
    learned: Option<PolicyModel>,
) -> Result<Policy> {
    let k = scores.n_actions();
    let n = scores.n_units();
    let mut best_const = 0;
    let mut best_val = f64::NEG_INFINITY;
    for a in 0..k {
        let v = policy_objective(scores, &vec![a; n]);
        if v > best_val {
            best_val = v;
            best_const = a;
        }
    }
    if let Some(model) = learned {
        let candidate = Policy::deterministic(model, k, features);
        let v = policy_objective(scores, &candidate.actions(features)?);
        if v > best_val {
            return Ok(candidate);
        }
    }
    Ok(Policy::constant(best_const, k, features))
}

fn to_f64<T: Scalar>(scores: &DrScoreMatrix<T>) -> DrScoreMatrix<f64> {
    let rows = (0..scores.n_units())
        .map(|i| scores.row(i).iter().map(|v| v.as_f64()).collect())
        .collect();
    DrScoreMatrix::from_rows(rows).expect("scores were validated")
}

/// Weighted classification for one pair: label 1 where `high` scores above
/// `low`, weight = the absolute gap. `None` when every gap is zero.
fn fit_pair(
    scores: &DrScoreMatrix<f64>,
    features: &Table,
    spec: &LearnerSpec,
    low: usize,
    high: usize,
) -> Result<Option<FittedClassifier>> {
    let n = scores.n_units();
    let mut labels = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let gap = scores.get(i, high) - scores.get(i, low);
        labels.push(usize::from(gap > 0.0));
        weights.push(gap.abs());
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Ok(None);
    }
    fit_classifier(spec, features, &labels, Some(&weights)).map(Some)
}

fn check_inputs<T: Scalar>(scores: &DrScoreMatrix<T>, features: &Table) -> Result<()> {
    if scores.n_units() != features.n_rows() {
        return Err(Error::arg(format!(
            "{} score rows for {} feature rows",
            scores.n_units(),
            features.n_rows()
        )));
    }
    if scores.n_units() == 0 {
        return Err(Error::arg("cannot learn a policy from zero units"));
    }
    Ok(())
}

/// Binary policy: classify the sign of `gamma_1 - gamma_0` with weight
/// `|gamma_1 - gamma_0|`.
pub fn learn_policy_binary<T: Scalar>(scores: &DrScoreMatrix<T>, features: &Table, classifier: &LearnerSpec) -> Result<Policy> {
    check_inputs(scores, features)?;
    if scores.n_actions() != 2 {
        return Err(Error::arg("learn_policy_binary needs exactly two actions"));
    }
    let s = to_f64(scores);
    let learned = match fit_pair(&s, features, classifier, 0, 1)? {
        Some(c) if c.n_classes() == 2 => Some(PolicyModel::Binary { classifier: c }),
        Some(_) => None,
        None => {
            warn!("all score gaps are zero; returning treat-none");
            None
        }
    };
    guard_with_constants(&s, features, learned)
}

pub(crate) fn tournament(scores: &DrScoreMatrix<f64>, features: &Table, classifier: &LearnerSpec) -> Result<Policy> {
    let k = scores.n_actions();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let fitted = pairs
        .par_iter()
        .map(|&(low, high)| {
            Ok(fit_pair(scores, features, classifier, low, high)?.map(|c| {
                // A one-class fit always predicts that class; keep it as a pair.
                PairClassifier { low, high, classifier: c }
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kept = Vec::new();
    for (p, (low, high)) in fitted.into_iter().zip(&pairs) {
        match p {
            Some(pc) => kept.push(pc),
            None => warn!("actions {low} and {high} have identical scores for every unit"),
        }
    }
    let learned = if kept.is_empty() {
        None
    } else {
        // Pairs with all-zero gaps vote for the lower action.
        let mut all = Vec::new();
        let mut it = kept.into_iter().peekable();
        for &(low, high) in &pairs {
            match it.peek() {
                Some(pc) if pc.low == low && pc.high == high => all.push(it.next().unwrap()),
                _ => all.push(PairClassifier {
                    low,
                    high,
                    classifier: constant_classifier(classifier, features, 0)?,
                }),
            }
        }
        Some(PolicyModel::Tournament { pairs: all })
    };
    guard_with_constants(scores, features, learned)
}

/// Classifier that always predicts `label`.
fn constant_classifier(spec: &LearnerSpec, features: &Table, label: usize) -> Result<FittedClassifier> {
    let n = features.n_rows();
    let mut w = vec![0.0; n];
    w[0] = 1.0;
    fit_classifier(spec, features, &vec![label; n], Some(&w))
}

/// Multi-action policy: a weighted binary classifier for every pair of
/// actions and a majority vote, ties to the lowest action id.
pub fn learn_policy_multi<T: Scalar>(scores: &DrScoreMatrix<T>, features: &Table, classifier: &LearnerSpec) -> Result<Policy> {
    check_inputs(scores, features)?;
    if scores.n_actions() < 3 {
        return Err(Error::arg("learn_policy_multi needs at least three actions"));
    }
    tournament(&to_f64(scores), features, classifier)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(values: &[f64]) -> Table {
        Table::from_floats(vec![("x", values.to_vec())]).unwrap()
    }

    #[test]
    fn uniform_positive_gap_treats_all() {
        let s = DrScoreMatrix::from_rows((0..6).map(|i| vec![0.0, 1.0 + i as f64]).collect()).unwrap();
        let f = x(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let p = learn_policy_binary(&s, &f, &LearnerSpec::tree(2)).unwrap();
        assert_eq!(p.actions(&f).unwrap(), vec![1; 6]);
    }

    #[test]
    fn separable_clusters_are_matched_exactly() {
        let xs = [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0];
        let s = DrScoreMatrix::from_rows(xs.iter().map(|&v| if v < 0.0 { vec![1.0, -1.0] } else { vec![0.0, 2.0] }).collect()).unwrap();
        let f = x(&xs);
        let p = learn_policy_binary(&s, &f, &LearnerSpec::tree(1)).unwrap();
        assert_eq!(p.actions(&f).unwrap(), vec![0, 0, 0, 1, 1, 1]);
        let back = Policy::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back.actions(&f).unwrap(), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn zero_gaps_give_treat_none() {
        let s = DrScoreMatrix::from_rows(vec![vec![1.0, 1.0]; 4]).unwrap();
        let f = x(&[0.0, 1.0, 2.0, 3.0]);
        let p = learn_policy_binary(&s, &f, &LearnerSpec::tree(2)).unwrap();
        assert_eq!(p.model, PolicyModel::Constant { action: 0 });
    }

    #[test]
    fn three_actions_match_argmax() {
        let xs = [-1.0, 0.0, 1.0];
        let rows = vec![vec![3.0, 1.0, 0.0], vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 4.0]];
        let s = DrScoreMatrix::from_rows(rows).unwrap();
        let f = x(&xs);
        let p = learn_policy_multi(&s, &f, &LearnerSpec::tree(2)).unwrap();
        assert_eq!(p.actions(&f).unwrap(), vec![0, 1, 2]);
        let dominant = DrScoreMatrix::from_rows(vec![vec![0.0, 5.0, 1.0]; 3]).unwrap();
        let p = learn_policy_multi(&dominant, &f, &LearnerSpec::tree(2)).unwrap();
        assert_eq!(p.actions(&f).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn tournament_with_two_actions_equals_binary() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|v| vec![0.0, v * 3.0 + 0.2 * (v * 9.0).cos()]).collect();
        let s = DrScoreMatrix::from_rows(rows).unwrap();
        let f = x(&xs);
        let b = learn_policy_binary(&s, &f, &LearnerSpec::tree(3)).unwrap();
        let t = tournament(&s, &f, &LearnerSpec::tree(3)).unwrap();
        assert_eq!(b.actions(&f).unwrap(), t.actions(&f).unwrap());
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let s = DrScoreMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = x(&[0.0, 1.0]);
        let p = learn_policy_binary(&s, &f, &LearnerSpec::tree(1)).unwrap();
        let other = Table::from_floats(vec![("z", vec![0.0])]).unwrap();
        assert!(matches!(policy_assign(&p, &other), Err(Error::Schema(_))));
    }
}
