//! Quadratic discriminant analysis with per-class shrunken covariances, and
//! Friedman-style regularized discriminant analysis as the baseline.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::selection::Classifier;
use crate::shrinkage::{alpha_hat, cernn_estimate, CernnParams, CovarianceEstimate};
use crate::spectral::{pooled_covariance, sample_covariance, SymMatrix};

/// One Gaussian class: prior weight, mean, and covariance estimate.
///
/// The prior may be zero for a cluster that EM has emptied out; a positive
/// definite covariance is required.
#[derive(Debug, Clone)]
pub struct GaussianClass {
    prior: f64,
    mean: Array1<f64>,
    covariance: CovarianceEstimate,
}

impl GaussianClass {
    pub fn new(prior: f64, mean: Array1<f64>, covariance: CovarianceEstimate) -> Result<Self> {
        if !prior.is_finite() || !(0.0..=1.0).contains(&prior) {
            return Err(Error::InvalidInput(format!(
                "class prior must lie in [0, 1], got {prior}"
            )));
        }
        if mean.len() != covariance.dim() {
            return Err(Error::InvalidInput(format!(
                "mean length {} does not match covariance dimension {}",
                mean.len(),
                covariance.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("class mean has non-finite entries".into()));
        }
        let smallest = covariance.spectrum().eigenvalues()[covariance.dim() - 1];
        if smallest <= 0.0 {
            return Err(Error::Singular(format!(
                "class covariance is not positive definite (smallest eigenvalue {smallest})"
            )));
        }
        Ok(Self {
            prior,
            mean,
            covariance,
        })
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &CovarianceEstimate {
        &self.covariance
    }

    /// Log Gaussian density at `x`.
    pub(crate) fn log_density(&self, x: ArrayView1<'_, f64>) -> f64 {
        let p = self.mean.len() as f64;
        let dev = &x - &self.mean;
        let quad = self
            .covariance
            .spectrum()
            .inverse_quadratic_form(dev.view())
            .expect("covariance validated positive definite");
        let ln_det = self
            .covariance
            .spectrum()
            .ln_det()
            .expect("covariance validated positive definite");
        -0.5 * (p * LN_2PI + ln_det + quad)
    }
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Which discriminant score the classifier evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiscriminantForm {
    /// The full Gaussian log-posterior
    /// `ln pi_k - (1/2) ln det Sigma_k - (1/2)(x - mu_k)' Sigma_k^{-1} (x - mu_k)`.
    /// With class-specific covariances this is the score QDA requires.
    #[default]
    LogPosterior,
    /// The classical linear score
    /// `x' Sigma_k^{-1} mu_k - mu_k' Sigma_k^{-1} mu_k + ln pi_k`, kept for
    /// comparison; valid only when the class covariances coincide.
    LinearScore,
}

/// A fitted per-class Gaussian classifier.
#[derive(Debug, Clone)]
pub struct QdaModel {
    classes: Vec<GaussianClass>,
}

impl QdaModel {
    pub fn classes(&self) -> &[GaussianClass] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.classes[0].mean.len()
    }

    /// Class with the largest Gaussian log-posterior; ties break toward the
    /// smallest class id.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> usize {
        self.predict_with_form(x, DiscriminantForm::LogPosterior)
    }

    pub fn predict_with_form(&self, x: ArrayView1<'_, f64>, form: DiscriminantForm) -> usize {
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (k, class) in self.classes.iter().enumerate() {
            let score = match form {
                DiscriminantForm::LogPosterior => {
                    if class.prior == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        class.prior.ln() + class.log_density(x)
                    }
                }
                DiscriminantForm::LinearScore => {
                    if class.prior == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        let spectrum = class.covariance.spectrum();
                        let proj_x = spectrum.eigenvectors().t().dot(&x);
                        let proj_mu = spectrum.eigenvectors().t().dot(&class.mean.view());
                        let mut x_inv_mu = 0.0;
                        let mut mu_inv_mu = 0.0;
                        for ((cx, cm), &e) in proj_x
                            .iter()
                            .zip(proj_mu.iter())
                            .zip(spectrum.eigenvalues().iter())
                        {
                            x_inv_mu += cx * cm / e;
                            mu_inv_mu += cm * cm / e;
                        }
                        x_inv_mu - mu_inv_mu + class.prior.ln()
                    }
                }
            };
            if score > best_score {
                best_score = score;
                best = k;
            }
        }
        best
    }
}

impl Classifier for QdaModel {
    fn classify(&self, x: ArrayView1<'_, f64>) -> usize {
        self.predict(x)
    }
}

fn class_rows(features: ArrayView2<'_, f64>, labels: &[usize], class: usize) -> Array2<f64> {
    let rows: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .collect();
    let mut out = Array2::zeros((rows.len(), features.ncols()));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&features.row(src));
    }
    out
}

fn validate_labels(n: usize, labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "label count {} does not match row count {n}",
            labels.len()
        )));
    }
    let mut counts = vec![0usize; n_classes];
    for &label in labels {
        if label >= n_classes {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        counts[label] += 1;
    }
    Ok(counts)
}

/// Fits one shrunken Gaussian per class: the class mean, the empirical prior
/// `|C_k| / n`, and the CERNN estimate of the class covariance with penalty
/// `lambdas[k]`, weight `|C_k|`, and the class's own scale-matched mixture
/// constant.
pub fn fit_qda(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    lambdas: &[f64],
) -> Result<QdaModel> {
    let n = features.nrows();
    let n_classes = lambdas.len();
    if n_classes == 0 {
        return Err(Error::InvalidInput("no per-class penalties supplied".into()));
    }
    let counts = validate_labels(n, labels, n_classes)?;
    for (k, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "class {k} has {count} sample(s); need at least 2"
            )));
        }
    }
    let mut classes = Vec::with_capacity(n_classes);
    for (k, &lambda) in lambdas.iter().enumerate() {
        let rows = class_rows(features, labels, k);
        let mean = rows.mean_axis(ndarray::Axis(0)).expect("class nonempty");
        let s_k = sample_covariance(rows.view())?;
        let alpha = alpha_hat(&s_k)?;
        let params = CernnParams::new(counts[k] as f64, lambda, alpha)?;
        let covariance = cernn_estimate(&s_k, &params)?;
        classes.push(GaussianClass::new(
            counts[k] as f64 / n as f64,
            mean,
            covariance,
        )?);
    }
    Ok(QdaModel { classes })
}

/// Friedman-style regularized discriminant analysis: each class uses the
/// convex combination `gamma S_k + (1 - gamma) S_pooled`.
pub fn fit_rda(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    gamma: f64,
) -> Result<QdaModel> {
    if !(0.0..=1.0).contains(&gamma) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let n = features.nrows();
    let counts = validate_labels(n, labels, n_classes)?;
    for (k, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "class {k} has {count} sample(s); need at least 2"
            )));
        }
    }
    let pooled = pooled_covariance(features, labels, n_classes)?;
    let mut classes = Vec::with_capacity(n_classes);
    for k in 0..n_classes {
        let rows = class_rows(features, labels, k);
        let mean = rows.mean_axis(ndarray::Axis(0)).expect("class nonempty");
        let s_k = sample_covariance(rows.view())?;
        let combined =
            SymMatrix::new(gamma * s_k.as_array() + (1.0 - gamma) * pooled.as_array())?;
        let covariance = CovarianceEstimate::sample(combined)?;
        classes.push(GaussianClass::new(
            counts[k] as f64 / n as f64,
            mean,
            covariance,
        )?);
    }
    Ok(QdaModel { classes })
}

/// Shared per-class penalty grids for supervised selection.
///
/// The grid scale is the largest per-class penalty bound, log-spaced over
/// four decades with an exact zero prepended. The zero candidate is dropped
/// for any class whose smallest training-fold size cannot produce a
/// full-rank covariance (the unpenalized fit would be singular there). The
/// fold plan is rebuilt from the same seed used for selection, so the check
/// matches the folds the search will see.
pub fn qda_lambda_grids(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
    epsilon: f64,
    size: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = features.nrows();
    let p = features.ncols();
    let counts = validate_labels(n, labels, n_classes)?;
    let mut lambda_max = 0.0f64;
    for class in 0..n_classes {
        let rows = class_rows(features, labels, class);
        let s_k = sample_covariance(rows.view())?;
        let alpha = alpha_hat(&s_k)?;
        let spectrum = crate::spectral::eig_sym(&s_k)?;
        let d: Vec<f64> = spectrum.eigenvalues().to_vec();
        let bound =
            crate::shrinkage::lambda_max_bound(&d, counts[class] as f64, alpha, epsilon)?;
        lambda_max = lambda_max.max(bound);
    }
    let shared = crate::selection::grid_from_lambda_max(lambda_max, size);
    let plan = crate::selection::make_stratified_folds(labels, n_classes, k, seed)?;
    let mut grids = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let mut min_train = usize::MAX;
        for fold in 0..k {
            let held = plan
                .heldout_indices(fold)
                .iter()
                .filter(|&&i| labels[i] == class)
                .count();
            min_train = min_train.min(counts[class] - held);
        }
        let grid: Vec<f64> = if min_train > p {
            shared.clone()
        } else {
            shared.iter().copied().filter(|&l| l > 0.0).collect()
        };
        if grid.is_empty() {
            return Err(Error::InvalidInput(format!(
                "class {class} admits no feasible penalty values (degenerate grid)"
            )));
        }
        grids.push(grid);
    }
    Ok(grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_blob_data() -> (Array2<f64>, Vec<usize>) {
        // Two well-separated spherical classes in the plane.
        let features = array![
            [0.0, 0.1],
            [0.2, -0.1],
            [-0.1, 0.0],
            [0.1, 0.2],
            [10.0, 9.9],
            [9.8, 10.1],
            [10.2, 10.0],
            [9.9, 9.8]
        ];
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        (features, labels)
    }

    #[test]
    fn qda_separates_well_separated_classes() {
        let (features, labels) = two_blob_data();
        let model = fit_qda(features.view(), &labels, &[0.5, 0.5]).unwrap();
        for (row, &label) in features.outer_iter().zip(&labels) {
            assert_eq!(model.predict(row), label);
        }
    }

    #[test]
    fn qda_point_at_class_mean_goes_to_that_class() {
        let (features, labels) = two_blob_data();
        let model = fit_qda(features.view(), &labels, &[1.0, 1.0]).unwrap();
        let mean0 = model.classes()[0].mean().clone();
        assert_eq!(model.predict(mean0.view()), 0);
        let mean1 = model.classes()[1].mean().clone();
        assert_eq!(model.predict(mean1.view()), 1);
    }

    #[test]
    fn qda_prediction_is_translation_invariant() {
        let (features, labels) = two_blob_data();
        let shift = array![3.5, -2.0];
        let shifted = &features + &shift.view().insert_axis(ndarray::Axis(0));
        let model = fit_qda(features.view(), &labels, &[0.7, 0.7]).unwrap();
        let model_shifted = fit_qda(shifted.view(), &labels, &[0.7, 0.7]).unwrap();
        for (row, srow) in features.outer_iter().zip(shifted.outer_iter()) {
            assert_eq!(model.predict(row), model_shifted.predict(srow));
        }
    }

    #[test]
    fn qda_large_penalty_reduces_to_scaled_nearest_centroid() {
        // With lambda huge, each class covariance collapses to sigma_k I with
        // sigma_k = tr(S_k)/p, so the rule becomes nearest-centroid with
        // per-class scale and prior corrections. Compare against that rule
        // written out explicitly from the raw class statistics.
        let (features, labels) = two_blob_data();
        let model = fit_qda(features.view(), &labels, &[1e12, 1e12]).unwrap();
        let p = 2.0;
        let mut stats = Vec::new();
        for k in 0..2 {
            let rows = class_rows(features.view(), &labels, k);
            let mean = rows.mean_axis(ndarray::Axis(0)).unwrap();
            let sigma = sample_covariance(rows.view()).unwrap().trace() / p;
            let prior = rows.nrows() as f64 / features.nrows() as f64;
            stats.push((mean, sigma, prior));
        }
        let mut rng = crate::rng::substream(67, 0);
        use rand::Rng;
        for _ in 0..50 {
            let x = array![rng.random_range(-3.0..13.0), rng.random_range(-3.0..13.0)];
            let oracle = stats
                .iter()
                .enumerate()
                .max_by(|(_, (ma, sa, pa)), (_, (mb, sb, pb))| {
                    let da: f64 = (&x - ma).iter().map(|v| v * v).sum();
                    let db: f64 = (&x - mb).iter().map(|v| v * v).sum();
                    let score_a = pa.ln() - 0.5 * p * sa.ln() - da / (2.0 * sa);
                    let score_b = pb.ln() - 0.5 * p * sb.ln() - db / (2.0 * sb);
                    score_a.partial_cmp(&score_b).unwrap()
                })
                .map(|(k, _)| k)
                .unwrap();
            assert_eq!(model.predict(x.view()), oracle);
        }
    }

    #[test]
    fn qda_rejects_tiny_classes() {
        let features = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let labels = vec![0, 0, 1];
        assert!(fit_qda(features.view(), &labels, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn rda_endpoints_match_pooled_and_per_class() {
        let (features, labels) = two_blob_data();
        let lda_like = fit_rda(features.view(), &labels, 2, 0.0).unwrap();
        let pooled = pooled_covariance(features.view(), &labels, 2).unwrap();
        for class in lda_like.classes() {
            let diff: f64 = class
                .covariance()
                .matrix()
                .as_array()
                .iter()
                .zip(pooled.as_array().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
        let qda_like = fit_rda(features.view(), &labels, 2, 1.0).unwrap();
        let s0 = sample_covariance(class_rows(features.view(), &labels, 0).view()).unwrap();
        let diff: f64 = qda_like.classes()[0]
            .covariance()
            .matrix()
            .as_array()
            .iter()
            .zip(s0.as_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn predictions_invariant_under_joint_rotation() {
        let (features, labels) = two_blob_data();
        let mut rng = crate::rng::substream(71, 0);
        use rand::Rng;
        let mut raw = Array2::zeros((2, 2));
        for v in raw.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let q = crate::spectral::eig_sym(&SymMatrix::symmetrized(raw).unwrap())
            .unwrap()
            .eigenvectors()
            .clone();
        let rotated = features.dot(&q.t());
        let model = fit_qda(features.view(), &labels, &[0.3, 0.3]).unwrap();
        let model_rot = fit_qda(rotated.view(), &labels, &[0.3, 0.3]).unwrap();
        for (row, rrow) in features.outer_iter().zip(rotated.outer_iter()) {
            assert_eq!(model.predict(row), model_rot.predict(rrow));
        }
    }
}
