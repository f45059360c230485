//! Doubly-robust scores, CATE, policy learning by weighted classification
//! and regret.

mod learn;
mod regret;
mod scores;
mod select;

pub use learn::{
    learn_policy_binary, learn_policy_multi, policy_assign, policy_objective, PairClassifier, Policy, PolicyKind,
    PolicyModel, POLICY_FORMAT_VERSION,
};
pub use regret::{regret, regret_bound, RegretReport};
pub use scores::{cate, dr_scores, CateEstimate, DrScoreMatrix};
pub use select::{learn_policy, select_policy_classifier, PolicySelection};
