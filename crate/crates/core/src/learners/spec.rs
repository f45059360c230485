use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learner family plus its hyperparameters.
///
/// All built-in families are deterministic given the data, so there is no
/// seed here; resampling procedures that wrap a learner carry their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LearnerSpec {
    RidgeLinear {
        #[serde(default)]
        l2_penalty: f64,
    },
    CartTree {
        max_depth: usize,
        #[serde(default = "one")]
        min_samples_leaf: usize,
    },
    GradientBoostedTrees {
        n_trees: usize,
        learning_rate: f64,
        max_depth: usize,
        #[serde(default = "one")]
        min_samples_leaf: usize,
        #[serde(default = "unit_penalty")]
        l2_penalty: f64,
    },
    Knn {
        k: usize,
    },
    Logistic {
        #[serde(default = "small_penalty")]
        l2_penalty: f64,
        #[serde(default = "default_iter")]
        max_iter: usize,
    },
}

fn one() -> usize {
    1
}
fn unit_penalty() -> f64 {
    1.0
}
fn small_penalty() -> f64 {
    1e-4
}
fn default_iter() -> usize {
    100
}

impl LearnerSpec {
    pub fn ridge(l2_penalty: f64) -> Self {
        LearnerSpec::RidgeLinear { l2_penalty }
    }

    pub fn tree(max_depth: usize) -> Self {
        LearnerSpec::CartTree {
            max_depth,
            min_samples_leaf: 1,
        }
    }

    pub fn boosted(n_trees: usize, learning_rate: f64, max_depth: usize) -> Self {
        LearnerSpec::GradientBoostedTrees {
            n_trees,
            learning_rate,
            max_depth,
            min_samples_leaf: 1,
            l2_penalty: 1.0,
        }
    }

    pub fn knn(k: usize) -> Self {
        LearnerSpec::Knn { k }
    }

    pub fn logistic(l2_penalty: f64) -> Self {
        LearnerSpec::Logistic {
            l2_penalty,
            max_iter: 100,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LearnerSpec::RidgeLinear { .. } => "ridge_linear",
            LearnerSpec::CartTree { .. } => "cart_tree",
            LearnerSpec::GradientBoostedTrees { .. } => "gradient_boosted_trees",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::Logistic { .. } => "logistic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(format!("{}: {m}", self.family_name())));
        match *self {
            LearnerSpec::RidgeLinear { l2_penalty } => {
                if !(l2_penalty >= 0.0 && l2_penalty.is_finite()) {
                    return bad(format!("l2_penalty must be >= 0, got {l2_penalty}"));
                }
            }
            LearnerSpec::CartTree {
                max_depth,
                min_samples_leaf,
            } => {
                if max_depth < 1 {
                    return bad("max_depth must be >= 1".into());
                }
                if min_samples_leaf < 1 {
                    return bad("min_samples_leaf must be >= 1".into());
                }
            }
            LearnerSpec::GradientBoostedTrees {
                n_trees,
                learning_rate,
                max_depth,
                min_samples_leaf,
                l2_penalty,
            } => {
                if n_trees < 1 {
                    return bad("n_trees must be >= 1".into());
                }
                if !(learning_rate > 0.0 && learning_rate <= 1.0) {
                    return bad(format!("learning_rate must be in (0, 1], got {learning_rate}"));
                }
                if max_depth < 1 {
                    return bad("max_depth must be >= 1".into());
                }
                if min_samples_leaf < 1 {
                    return bad("min_samples_leaf must be >= 1".into());
                }
                if !(l2_penalty >= 0.0 && l2_penalty.is_finite()) {
                    return bad(format!("l2_penalty must be >= 0, got {l2_penalty}"));
                }
            }
            LearnerSpec::Knn { k } => {
                if k < 1 {
                    return bad("k must be >= 1".into());
                }
            }
            LearnerSpec::Logistic {
                l2_penalty,
                max_iter,
            } => {
                if !(l2_penalty >= 0.0 && l2_penalty.is_finite()) {
                    return bad(format!("l2_penalty must be >= 0, got {l2_penalty}"));
                }
                if max_iter < 1 {
                    return bad("max_iter must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Ordering key where smaller means simpler: fewer trees, then smaller
    /// depth, then larger penalty, then larger k.
    pub fn complexity_key(&self) -> (usize, usize, f64, f64) {
        match *self {
            LearnerSpec::RidgeLinear { l2_penalty } => (0, 0, -l2_penalty, 0.0),
            LearnerSpec::CartTree { max_depth, .. } => (1, max_depth, 0.0, 0.0),
            LearnerSpec::GradientBoostedTrees {
                n_trees,
                max_depth,
                l2_penalty,
                ..
            } => (n_trees, max_depth, -l2_penalty, 0.0),
            LearnerSpec::Knn { k } => (0, 0, 0.0, -(k as f64)),
            LearnerSpec::Logistic { l2_penalty, .. } => (0, 0, -l2_penalty, 0.0),
        }
    }
}

/// Fixed default grid for boosted trees: depth in {2,3,4}, trees in {50,200},
/// learning rate in {0.1,0.3}.
pub fn default_boosting_grid() -> Vec<LearnerSpec> {
    let mut grid = Vec::new();
    for &n_trees in &[50, 200] {
        for &max_depth in &[2, 3, 4] {
            for &learning_rate in &[0.1, 0.3] {
                grid.push(LearnerSpec::boosted(n_trees, learning_rate, max_depth));
            }
        }
    }
    grid
}

/// Fixed default grid for ridge: penalties {0, 0.01, 0.1, 1}.
pub fn default_ridge_grid() -> Vec<LearnerSpec> {
    [0.0, 0.01, 0.1, 1.0].iter().map(|&p| LearnerSpec::ridge(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(LearnerSpec::tree(0).validate().is_err());
        assert!(LearnerSpec::boosted(10, 0.0, 2).validate().is_err());
        assert!(LearnerSpec::boosted(10, 1.5, 2).validate().is_err());
        assert!(LearnerSpec::boosted(10, 1.0, 2).validate().is_ok());
        assert!(LearnerSpec::knn(0).validate().is_err());
        assert!(LearnerSpec::ridge(-1.0).validate().is_err());
        assert!(LearnerSpec::ridge(0.0).validate().is_ok());
    }

    #[test]
    fn json_shape() {
        let s: LearnerSpec =
            serde_json::from_str(r#"{"family":"cart_tree","max_depth":3}"#).unwrap();
        assert_eq!(s, LearnerSpec::tree(3));
        let j = serde_json::to_string(&LearnerSpec::ridge(0.5)).unwrap();
        assert_eq!(j, r#"{"family":"ridge_linear","l2_penalty":0.5}"#);
    }

    #[test]
    fn default_grid_has_twelve_specs() {
        let g = default_boosting_grid();
        assert_eq!(g.len(), 12);
        assert!(g.iter().all(|s| s.validate().is_ok()));
    }
}
