//! Covariance estimation with nuclear-norm-regularized eigenvalue shrinkage.
//!
//! The CERNN estimator keeps the eigenvectors of the sample covariance and
//! replaces each eigenvalue with the positive root of an essentially
//! quadratic stationarity equation, pulling large eigenvalues down and small
//! ones up toward a data-matched scale. Alongside it: linear shrinkage, the
//! Ledoit-Wolf rule, and condition-number regularization as baselines;
//! cross-validated penalty selection; entropy/quadratic loss benchmarking
//! harnesses; and two downstream applications (regularized quadratic
//! discriminant analysis and covariance-regularized EM clustering).

pub mod applications;
pub mod error;
pub mod losses;
pub mod rng;
pub mod selection;
pub mod shrinkage;
pub mod spectral;

pub use error::{Error, Result};
pub use shrinkage::{CernnParams, CovarianceEstimate, Method, MethodParams};
pub use spectral::{SpectralDecomposition, SymMatrix};
