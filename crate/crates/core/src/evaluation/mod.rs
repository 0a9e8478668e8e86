//! Accuracy metrics, cross-validation and the prediction pipeline.

mod cv;
mod kcca;
mod metrics;
mod ridge;

pub use cv::{
    cv_select_lambda, cv_select_lambda_with, prediction_cv, stratified_folds, CvCriterion, CvReport,
    CvSettings, PredictionReport,
};
pub use kcca::{kcca_score, DEFAULT_KCCA_REG};
pub use metrics::{multiple_correlation, pmae, MultipleCorrelation};
pub use ridge::{kernel_ridge_fit, kernel_ridge_predict, KernelRidge, DEFAULT_RIDGE_REG};
