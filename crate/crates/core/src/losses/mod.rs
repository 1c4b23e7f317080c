//! Loss metrics against a known population covariance, multivariate normal
//! sampling, and the simulation harnesses built on them.

mod experiments;

pub use experiments::{
    bimodal_experiment, dispersion_experiment, path_at_condition_number, BimodalSpec,
    BimodalTable, DispersionRow, DispersionSpec, ExperimentMethod, HighFraction, PathPoint,
    RatioSummary, TrialLosses,
};

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{eig_sym, SymMatrix};

/// Entropy and quadratic loss of an estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub entropy: f64,
    pub quadratic: f64,
}

/// Entropy loss `tr(Sigma^{-1} Sigma_hat) - log det(Sigma^{-1} Sigma_hat) - p`.
///
/// Nonnegative, zero exactly when the estimate equals the truth, and
/// asymmetric in its arguments.
pub fn entropy_loss(estimate: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    check_dims(estimate, truth)?;
    let truth_spec = eig_sym(truth)?;
    let est_spec = eig_sym(estimate)?;
    let ln_det_truth = truth_spec.ln_det()?;
    let ln_det_est = est_spec.ln_det()?;
    let trace_term = trace_inv_product(truth, estimate)?;
    Ok(trace_term - (ln_det_est - ln_det_truth) - estimate.dim() as f64)
}

/// Quadratic loss `|| Sigma_hat Sigma^{-1} - I ||_F^2`.
pub fn quadratic_loss(estimate: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    check_dims(estimate, truth)?;
    let inv = inverse_of(truth)?;
    let m = estimate.as_array().dot(&inv);
    let p = estimate.dim();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            let v = m[[i, j]] - if i == j { 1.0 } else { 0.0 };
            acc += v * v;
        }
    }
    Ok(acc)
}

/// Both losses in one pass (the truth is decomposed once).
pub fn loss_report(estimate: &SymMatrix, truth: &SymMatrix) -> Result<LossReport> {
    Ok(LossReport {
        entropy: entropy_loss(estimate, truth)?,
        quadratic: quadratic_loss(estimate, truth)?,
    })
}

fn check_dims(estimate: &SymMatrix, truth: &SymMatrix) -> Result<()> {
    if estimate.dim() != truth.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: estimate {} vs truth {}",
            estimate.dim(),
            truth.dim()
        )));
    }
    Ok(())
}

fn inverse_of(m: &SymMatrix) -> Result<Array2<f64>> {
    let spec = eig_sym(m)?;
    if spec.eigenvalues()[m.dim() - 1] <= 0.0 {
        return Err(Error::Singular("matrix is not positive definite".into()));
    }
    let inv_vals: Vec<f64> = spec.eigenvalues().iter().map(|e| 1.0 / e).collect();
    // Inverse eigenvalues ascend, so rebuild through the raw basis directly.
    let q = spec.eigenvectors();
    let p = m.dim();
    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += q[[i, k]] * inv_vals[k] * q[[j, k]];
            }
            out[[i, j]] = acc;
            out[[j, i]] = acc;
        }
    }
    Ok(out)
}

/// `tr(A^{-1} B)` for symmetric `A`, `B` via the elementwise product.
fn trace_inv_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    let inv = inverse_of(a)?;
    Ok(inv
        .iter()
        .zip(b.as_array().iter())
        .map(|(x, y)| x * y)
        .sum())
}

/// Draws `n` i.i.d. rows from `N(mean, cov)` through the spectral square
/// root of `cov`. Tiny negative eigenvalues (above `-1e-10`) are clamped to
/// zero; anything more negative is rejected.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: ArrayView1<'_, f64>,
    cov: &SymMatrix,
    n: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let p = cov.dim();
    if mean.len() != p {
        return Err(Error::InvalidInput(format!(
            "mean length {} does not match covariance dimension {p}",
            mean.len()
        )));
    }
    let spec = eig_sym(cov)?;
    let mut roots = Vec::with_capacity(p);
    for &e in spec.eigenvalues() {
        if e < -1e-10 {
            return Err(Error::InvalidInput(format!(
                "covariance has negative eigenvalue {e}"
            )));
        }
        roots.push(e.max(0.0).sqrt());
    }
    let q = spec.eigenvectors();
    let mut out = Array2::zeros((n, p));
    let mut scaled = vec![0.0; p];
    for mut row in out.outer_iter_mut() {
        for (s, &r) in scaled.iter_mut().zip(&roots) {
            let z: f64 = rng.sample(StandardNormal);
            *s = r * z;
        }
        for i in 0..p {
            // Accumulate the zero-mean part first so a mean shift changes the
            // output by exactly `mean`.
            let mut acc = 0.0;
            for (k, &s) in scaled.iter().enumerate() {
                acc += q[[i, k]] * s;
            }
            row[i] = mean[i] + acc;
        }
    }
    Ok(out)
}
