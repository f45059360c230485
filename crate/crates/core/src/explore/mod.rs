//! Exploration: bootstrap Thompson sampling, probability clipping and the
//! risk-based design policy.

mod bts;
mod clip;
mod design;

pub use bts::{
    bts_from_tallies, bts_policy, sample_actions, write_assignment_csv, write_assignment_csv_to, BtsConfig, BtsResult,
    DrPolicyPipeline, PolicyPipeline,
};
pub use clip::clip_probabilities;
pub use design::{design_policy_from_risk, normal_cdf, normal_quantile, DesignPolicyConfig};
