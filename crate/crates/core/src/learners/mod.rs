//! Weighted supervised learners: ridge, logistic, CART, gradient-boosted
//! trees and k-nearest neighbours, with a common fit/predict surface,
//! JSON persistence, interpretation tools and cross-validated tuning.

mod boosting;
mod design;
mod interpret;
mod knn;
mod linalg;
mod linear;
mod model;
mod spec;
mod tree;
mod tuning;

pub use boosting::BoostedParams;
pub use design::{DenseMatrix, EncodedColumn, FeatureSchema};
pub use interpret::{accumulated_local_effects, permutation_importance, quantile_sorted, AleCurve, FeatureImportance, Metric};
pub use knn::KnnParams;
pub use linear::LinearParams;
pub use model::{
    fit_classifier, fit_regressor, ClassifierParams, FittedClassifier, FittedRegressor, Predictor, RegressorParams,
    MODEL_FORMAT_VERSION,
};
pub use spec::{default_boosting_grid, default_ridge_grid, LearnerSpec};
pub use tree::{Tree, TreeNode};
pub use tuning::{select_regressor, CvResult};

pub(crate) use linalg::solve_psd;
pub(crate) use model::{argmax, read_text, write_text};
