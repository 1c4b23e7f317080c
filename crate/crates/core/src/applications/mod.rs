//! Downstream consumers of the shrinkage estimators: regularized quadratic
//! discriminant analysis and covariance-regularized EM clustering.

mod clustering;
mod discriminant;

pub use clustering::{
    em_cluster, kmeanspp_init, penalized_objective, EmConfig, EmFit, MixtureState,
    Responsibilities,
};
pub use discriminant::{
    fit_qda, fit_rda, qda_lambda_grids, DiscriminantForm, GaussianClass, QdaModel,
};
