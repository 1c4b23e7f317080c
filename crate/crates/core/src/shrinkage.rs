//! Covariance estimators that rescale sample eigenvalues.
//!
//! The centerpiece is the CERNN map: the MAP estimate under a prior built
//! from the nuclear norms of the covariance and its inverse. Each sample
//! eigenvalue `d` is replaced by the unique positive root of
//!
//! ```text
//! lambda * alpha * e^2 + n * e - n * d - lambda * (1 - alpha) = 0
//! ```
//!
//! while the eigenvectors are kept. Baselines: linear shrinkage toward a
//! scaled identity, the Ledoit-Wolf data-driven linear rule, and
//! condition-number regularization (CNR), which clamps eigenvalues into
//! `[tau*, kappa_max * tau*]`.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::spectral::{eig_sym, sample_covariance, SpectralDecomposition, SymMatrix};

/// Parameters of the CERNN eigenvalue map.
///
/// `n` is the effective sample weight: the sample size when shrinking a
/// sample covariance, or a cluster weight inside EM. `lambda` is the penalty
/// strength and `alpha` the prior mixture constant in (0, 1); the prior mode
/// sits at `sqrt((1 - alpha) / alpha) * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CernnParams {
    n: f64,
    lambda: f64,
    alpha: f64,
}

impl CernnParams {
    pub fn new(n: f64, lambda: f64, alpha: f64) -> Result<Self> {
        if !n.is_finite() || n < 0.0 {
            return Err(Error::InvalidInput(format!(
                "effective sample weight must be finite and >= 0, got {n}"
            )));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidInput(format!(
                "penalty strength must be finite and >= 0, got {lambda}"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "mixture constant must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        Ok(Self { n, lambda, alpha })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The common eigenvalue maximizing the prior alone.
    pub fn prior_mode(&self) -> f64 {
        ((1.0 - self.alpha) / self.alpha).sqrt()
    }
}

/// Estimation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sample,
    Cernn,
    Linear,
    Lw,
    Cnr,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sample => "sample",
            Method::Cernn => "cernn",
            Method::Linear => "linear",
            Method::Lw => "lw",
            Method::Cnr => "cnr",
        }
    }
}

/// Method-specific parameter record attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodParams {
    Sample,
    Cernn { n: f64, lambda: f64, alpha: f64 },
    Linear { gamma: f64, rho: f64 },
    Lw { weight: f64 },
    Cnr { kappa_max: f64, tau_star: f64 },
}

impl MethodParams {
    pub fn method(&self) -> Method {
        match self {
            MethodParams::Sample => Method::Sample,
            MethodParams::Cernn { .. } => Method::Cernn,
            MethodParams::Linear { .. } => Method::Linear,
            MethodParams::Lw { .. } => Method::Lw,
            MethodParams::Cnr { .. } => Method::Cnr,
        }
    }
}

/// An estimated covariance matrix with its method tag, the parameters used,
/// and the cached spectrum.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    matrix: SymMatrix,
    params: MethodParams,
    spectrum: SpectralDecomposition,
}

impl CovarianceEstimate {
    /// Wraps a raw sample covariance (no shrinkage).
    pub fn sample(matrix: SymMatrix) -> Result<Self> {
        let spectrum = eig_sym(&matrix)?;
        Ok(Self {
            matrix,
            params: MethodParams::Sample,
            spectrum,
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn method(&self) -> Method {
        self.params.method()
    }

    pub fn params(&self) -> &MethodParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// The CERNN eigenvalue map: the positive root of
/// `lambda*alpha*e^2 + n*e - n*d - lambda*(1-alpha) = 0`.
///
/// Evaluated as `2(nd + lambda(1-alpha)) / (n + sqrt(n^2 + 4 lambda alpha
/// (nd + lambda(1-alpha))))`, which avoids the cancellation the textbook
/// quadratic formula suffers when `lambda*alpha*d << n`. The removable
/// singularities are handled exactly: `lambda = 0` returns `d`, and `n = 0`
/// returns the prior mode.
pub fn cernn_eigenvalue(d: f64, params: &CernnParams) -> Result<f64> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sample eigenvalue must be finite and >= 0, got {d}"
        )));
    }
    if params.n == 0.0 && params.lambda == 0.0 {
        return Err(Error::Underdetermined(
            "no data (n = 0) and no prior (lambda = 0)".into(),
        ));
    }
    if params.lambda == 0.0 {
        return Ok(d);
    }
    if params.n == 0.0 {
        return Ok(params.prior_mode());
    }
    let n = params.n;
    let c = n * d + params.lambda * (1.0 - params.alpha);
    Ok(2.0 * c / (n + (n * n + 4.0 * params.lambda * params.alpha * c).sqrt()))
}

/// Applies the CERNN map to every sample eigenvalue and rebuilds the matrix
/// in the sample eigenbasis.
///
/// With `lambda = 0` the input is returned unchanged (bit-for-bit). Tiny
/// negative eigenvalues from a numerically rank-deficient PSD input are
/// clamped to zero before mapping; genuinely indefinite input is rejected.
pub fn cernn_estimate(s: &SymMatrix, params: &CernnParams) -> Result<CovarianceEstimate> {
    if params.n == 0.0 && params.lambda == 0.0 {
        return Err(Error::Underdetermined(
            "no data (n = 0) and no prior (lambda = 0)".into(),
        ));
    }
    let spectrum = eig_sym(s)?;
    let record = MethodParams::Cernn {
        n: params.n,
        lambda: params.lambda,
        alpha: params.alpha,
    };
    if params.lambda == 0.0 {
        return Ok(CovarianceEstimate {
            matrix: s.clone(),
            params: record,
            spectrum,
        });
    }
    let d = psd_eigenvalues(&spectrum)?;
    let mut mapped: Vec<f64> = d
        .iter()
        .map(|&di| cernn_eigenvalue(di, params))
        .collect::<Result<_>>()?;
    monotone_repair(&mut mapped);
    let matrix = spectrum.reconstruct_with(&mapped);
    let spectrum = replace_eigenvalues(spectrum, &mapped);
    Ok(CovarianceEstimate {
        matrix,
        params: record,
        spectrum,
    })
}

/// The eigenvalue maps in this module are monotone, so mapped spectra stay
/// descending up to rounding on near-tied inputs; a forward pass repairs
/// those one-ulp inversions.
fn monotone_repair(values: &mut [f64]) {
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            values[i] = values[i - 1];
        }
    }
}

/// Swaps the eigenvalues of a decomposition, keeping the basis.
fn replace_eigenvalues(spectrum: SpectralDecomposition, values: &[f64]) -> SpectralDecomposition {
    let basis = spectrum.eigenvectors().clone();
    SpectralDecomposition::with_basis(values.to_vec(), basis)
}

/// Eigenvalues of a PSD matrix with tiny negative noise flushed to zero.
pub(crate) fn psd_eigenvalues(spectrum: &SpectralDecomposition) -> Result<Vec<f64>> {
    let top = spectrum.eigenvalues()[0].max(0.0);
    let tol = -1e-8 * (1.0 + top);
    let mut out = Vec::with_capacity(spectrum.dim());
    for &e in spectrum.eigenvalues() {
        if e < tol {
            return Err(Error::InvalidInput(format!(
                "matrix is not positive semidefinite: eigenvalue {e}"
            )));
        }
        out.push(e.max(0.0));
    }
    Ok(out)
}

/// The scale-matching mixture constant: `alpha = [1 + (tr(S)/p)^2]^{-1}`.
///
/// This makes the prior mode equal the mean sample eigenvalue.
pub fn alpha_hat(s: &SymMatrix) -> Result<f64> {
    let trace = s.trace();
    if trace <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "alpha requires tr(S) > 0, got {trace}"
        )));
    }
    let sigma = trace / s.dim() as f64;
    // For sigma^2 below machine epsilon the quotient rounds to exactly 1;
    // keep the result strictly inside (0, 1).
    Ok((1.0 / (1.0 + sigma * sigma)).min(1.0 - f64::EPSILON))
}

/// Smallest penalty strength at which every shrunken eigenvalue sits within
/// `epsilon` of the prior mode (first-order in `1/lambda`).
///
/// Returns `max_i |m * n * d_i / (2(1-alpha)) - n / (2 alpha)| / (epsilon *
/// m)` with `m = sqrt((1-alpha)/alpha)`. Returns 0 when every `d_i` equals
/// the prior mode; callers must treat that as a degenerate grid.
pub fn lambda_max_bound(d: &[f64], n: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::InvalidInput("empty eigenvalue vector".into()));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "alpha must lie strictly inside (0, 1), got {alpha}"
        )));
    }
    if !n.is_finite() || n < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sample weight must be >= 0, got {n}"
        )));
    }
    let mode = ((1.0 - alpha) / alpha).sqrt();
    let worst = d
        .iter()
        .map(|&di| (mode * n * di / (2.0 * (1.0 - alpha)) - n / (2.0 * alpha)).abs())
        .fold(0.0, f64::max);
    Ok(worst / (epsilon * mode))
}

/// Linear shrinkage `(1 - gamma) S + gamma rho I`; eigenvalues map affinely
/// while the eigenvectors stay fixed.
pub fn linear_shrinkage(s: &SymMatrix, gamma: f64, rho: f64) -> Result<CovarianceEstimate> {
    if !gamma.is_finite() || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "shrinkage target scale must be > 0, got {rho}"
        )));
    }
    let spectrum = eig_sym(s)?;
    let record = MethodParams::Linear { gamma, rho };
    if gamma == 0.0 {
        return Ok(CovarianceEstimate {
            matrix: s.clone(),
            params: record,
            spectrum,
        });
    }
    let mut mapped: Vec<f64> = spectrum
        .eigenvalues()
        .iter()
        .map(|&di| (1.0 - gamma) * di + gamma * rho)
        .collect();
    monotone_repair(&mut mapped);
    let matrix = spectrum.reconstruct_with(&mapped);
    let spectrum = replace_eigenvalues(spectrum, &mapped);
    Ok(CovarianceEstimate {
        matrix,
        params: record,
        spectrum,
    })
}

/// The Ledoit-Wolf linear estimator with identity target scaled by the mean
/// eigenvalue.
///
/// With `m = tr(S)/p`, `d2 = ||S - mI||_F^2 / p`, and `bbar2 = (1/n^2) sum_j
/// ||(y_j - ybar)(y_j - ybar)' - S||_F^2 / p`, the estimate is
/// `(b2/d2) m I + (1 - b2/d2) S` where `b2 = min(bbar2, d2)`. When `S` is
/// already a multiple of the identity (`d2 = 0`) the sample covariance is
/// returned unchanged with weight 0.
pub fn lw_estimate(data: ArrayView2<'_, f64>) -> Result<CovarianceEstimate> {
    let (n, p) = data.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "ledoit-wolf needs n >= 2 observations, got {n}"
        )));
    }
    let s = sample_covariance(data)?;
    let spectrum = eig_sym(&s)?;
    let pf = p as f64;
    let m = s.trace() / pf;
    let mut d2 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { m } else { 0.0 };
            let diff = s.as_array()[[i, j]] - target;
            d2 += diff * diff;
        }
    }
    d2 /= pf;
    if d2 <= 0.0 {
        return Ok(CovarianceEstimate {
            matrix: s,
            params: MethodParams::Lw { weight: 0.0 },
            spectrum,
        });
    }
    let mean = data.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let mut bbar2 = 0.0;
    let mut dev = vec![0.0; p];
    for row in data.outer_iter() {
        for (d, (x, mu)) in dev.iter_mut().zip(row.iter().zip(mean.iter())) {
            *d = x - mu;
        }
        let mut norm = 0.0;
        for i in 0..p {
            for j in 0..p {
                let diff = dev[i] * dev[j] - s.as_array()[[i, j]];
                norm += diff * diff;
            }
        }
        bbar2 += norm / pf;
    }
    bbar2 /= (n * n) as f64;
    let b2 = bbar2.min(d2);
    let weight = b2 / d2;
    let record = MethodParams::Lw { weight };
    if weight == 0.0 {
        return Ok(CovarianceEstimate {
            matrix: s,
            params: record,
            spectrum,
        });
    }
    let mut mapped: Vec<f64> = spectrum
        .eigenvalues()
        .iter()
        .map(|&di| (1.0 - weight) * di + weight * m)
        .collect();
    monotone_repair(&mut mapped);
    let matrix = spectrum.reconstruct_with(&mapped);
    let spectrum = replace_eigenvalues(spectrum, &mapped);
    Ok(CovarianceEstimate {
        matrix,
        params: record,
        spectrum,
    })
}

/// Condition-number regularization: clamps each eigenvalue into
/// `[tau*, kappa_max * tau*]`.
///
/// `tau*` minimizes the profile negative loglikelihood `h(tau) = sum_i
/// [ln e_i(tau) + d_i / e_i(tau)]` over `[d_p / kappa_max, d_1]`. The
/// objective is convex in `ln tau`, so a golden-section search in log space
/// finds the global minimum; the `kappa_max = 1` solution is the mean
/// eigenvalue and is returned in closed form.
pub fn cnr_eigenvalues(d: &[f64], kappa_max: f64) -> Result<(Vec<f64>, f64)> {
    if d.is_empty() {
        return Err(Error::InvalidInput("empty eigenvalue vector".into()));
    }
    if d.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidInput(
            "cnr requires strictly positive eigenvalues".into(),
        ));
    }
    if d.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(
            "eigenvalues must be sorted in descending order".into(),
        ));
    }
    if !kappa_max.is_finite() || kappa_max < 1.0 {
        return Err(Error::InvalidInput(format!(
            "kappa_max must be >= 1, got {kappa_max}"
        )));
    }
    let p = d.len();
    let top = d[0];
    let bottom = d[p - 1];
    if kappa_max == 1.0 {
        let sigma = d.iter().sum::<f64>() / p as f64;
        return Ok((vec![sigma; p], sigma));
    }
    if kappa_max >= top / bottom {
        // Constraint slack: nothing clamps.
        return Ok((d.to_vec(), bottom));
    }
    let h = |tau: f64| -> f64 {
        let hi = kappa_max * tau;
        d.iter()
            .map(|&di| {
                let e = di.clamp(tau, hi);
                e.ln() + di / e
            })
            .sum()
    };
    let mut lo = (bottom / kappa_max).ln();
    let mut hi = top.ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = h(x1.exp());
    let mut f2 = h(x2.exp());
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = h(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = h(x2.exp());
        }
    }
    let tau_star = (0.5 * (lo + hi)).exp();
    let upper = kappa_max * tau_star;
    let e: Vec<f64> = d.iter().map(|&di| di.clamp(tau_star, upper)).collect();
    Ok((e, tau_star))
}

/// The full CNR estimate: clamped eigenvalues in the sample eigenbasis.
pub fn cnr_estimate(s: &SymMatrix, kappa_max: f64) -> Result<CovarianceEstimate> {
    let spectrum = eig_sym(s)?;
    let d: Vec<f64> = spectrum.eigenvalues().to_vec();
    let (e, tau_star) = cnr_eigenvalues(&d, kappa_max)?;
    let record = MethodParams::Cnr {
        kappa_max,
        tau_star,
    };
    let matrix = spectrum.reconstruct_with(&e);
    let spectrum = replace_eigenvalues(spectrum, &e);
    Ok(CovarianceEstimate {
        matrix,
        params: record,
        spectrum,
    })
}

/// Eigenvalues floored at a small positive fraction of the largest one, for
/// running CNR on a numerically rank-deficient sample spectrum.
pub(crate) fn floored_eigenvalues(d: &[f64], rel_floor: f64) -> Result<Vec<f64>> {
    let top = d.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::InvalidInput(
            "cannot floor a spectrum with no positive eigenvalues".into(),
        ));
    }
    let floor = top * rel_floor;
    Ok(d.iter().map(|&v| v.max(floor)).collect())
}
