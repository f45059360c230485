//! Off-policy value estimation: Horvitz–Thompson, Hájek and doubly-robust
//! estimators, cross-fitted outcome models, bootstrap intervals and
//! ATE/ATT contrasts.

mod bootstrap;
mod effects;
mod estimators;
mod outcome_model;
mod snapshot;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapEstimate, EvaluationReport};
pub use effects::{estimate_ate_att, Estimand};
pub use estimators::{dr_contributions, importance_weights, value_dr, value_hajek, value_ht, EstimatorKind, ValueEstimate};
pub use outcome_model::{fit_crossfit_outcome_model, CrossFitOutcomeModel, OutcomeModelOptions, OutcomePredictions};
pub use snapshot::{PolicySnapshot, SnapshotKind};
