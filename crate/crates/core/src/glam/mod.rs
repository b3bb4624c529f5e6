//! Generalized lambda models: representation, likelihood and fitting.

pub mod fgls;
pub mod fit;
pub mod likelihood;
pub mod model;

pub use fgls::{fgls, modified_fgls, FglsResult, ModifiedFglsOptions, ModifiedFglsResult};
pub use fit::{fit, FitConfig};
pub use likelihood::{
    model_coefficients, neg_log_likelihood, neg_log_likelihood_replicated, neg_log_likelihood_with_gradient, GradientMode,
    Likelihood, LikelihoodOptions, Objective,
};
pub use model::{post_threshold, Dataset, FitMetadata, GlamModel, OptimizerKind, RoundReport, DEFAULT_SHAPE_FLOOR};
