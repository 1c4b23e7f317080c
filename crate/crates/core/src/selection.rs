//! Model selection by K-fold cross-validation.
//!
//! Unsupervised selection scores a grid of penalty strengths by predictive
//! negative loglikelihood on held-out folds; supervised selection picks
//! per-class parameters by held-out misclassification on stratified folds.
//!
//! Held-out scoring centers rows by the training-fold mean by default (the
//! covariance model is mean-centered); passing [`CenterMode::Zero`] scores
//! raw second moments instead.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::shrinkage::{
    alpha_hat, cernn_eigenvalue, cnr_eigenvalues, floored_eigenvalues, psd_eigenvalues,
    CernnParams, CovarianceEstimate,
};
use crate::spectral::{eig_sym, sample_covariance};

/// Assignment of each observation to one of `K` folds.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    k: usize,
    seed: u64,
}

impl FoldPlan {
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Row indices held out by fold `fold`.
    pub fn heldout_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Row indices used for training when fold `fold` is held out.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Balanced folds: a seeded shuffle followed by round-robin assignment, so
/// fold sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "fold count must satisfy 2 <= K <= n, got K = {k}, n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, 0);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (position, &row) in order.iter().enumerate() {
        assignments[row] = position % k;
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
    })
}

/// Stratified folds: members of each class are shuffled and dealt round-robin
/// through a global cursor, so fold sizes stay balanced and every class with
/// at least two members appears in at least two folds (hence in every
/// training set).
pub fn make_stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "fold count must satisfy 2 <= K <= n, got K = {k}, n = {n}"
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        members[label].push(i);
    }
    for (class, rows) in members.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {} sample(s); need at least 2 so it reaches every training fold",
                rows.len()
            )));
        }
    }
    let mut rng = substream(seed, 0);
    let mut assignments = vec![0usize; n];
    let mut cursor = 0usize;
    for rows in &mut members {
        rows.shuffle(&mut rng);
        for &row in rows.iter() {
            assignments[row] = cursor % k;
            cursor += 1;
        }
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
    })
}

/// Whether held-out rows are centered by the training mean or left raw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterMode {
    TrainMean,
    Zero,
}

/// Outcome of a cross-validated grid search.
#[derive(Debug, Clone)]
pub struct CvResult {
    grid: Vec<f64>,
    mean_scores: Vec<f64>,
    chosen: f64,
}

impl CvResult {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mean_scores(&self) -> &[f64] {
        &self.mean_scores
    }

    pub fn chosen(&self) -> f64 {
        self.chosen
    }
}

/// Predictive negative loglikelihood of `estimate` on held-out rows:
/// `(n_k/2) ln det(Sigma) + (n_k/2) tr(S_ho Sigma^{-1})` where `S_ho` is the
/// second-moment matrix of the rows about `center`.
pub fn predictive_negloglik(
    estimate: &CovarianceEstimate,
    heldout: ArrayView2<'_, f64>,
    center: ArrayView1<'_, f64>,
) -> Result<f64> {
    let p = estimate.dim();
    if heldout.ncols() != p || center.len() != p {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: estimate is {p}-dimensional, held-out rows have {} columns",
            heldout.ncols()
        )));
    }
    let spectrum = estimate.spectrum();
    let ln_det = spectrum.ln_det()?;
    let nk = heldout.nrows() as f64;
    let mut trace_term = 0.0;
    for row in heldout.outer_iter() {
        let dev = &row - &center;
        trace_term += spectrum.inverse_quadratic_form(dev.view())?;
    }
    Ok(0.5 * nk * ln_det + 0.5 * trace_term)
}

/// Penalty grid `{0} ∪ logspace(lambda_max * 1e-4, lambda_max, size - 1)`.
///
/// Returns `{0}` alone when the spectrum already sits at the prior mode
/// (`lambda_max = 0`); callers should treat that grid as degenerate.
pub fn lambda_grid(d: &[f64], n: f64, alpha: f64, epsilon: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::InvalidInput(format!(
            "grid size must be >= 2, got {size}"
        )));
    }
    let lambda_max = crate::shrinkage::lambda_max_bound(d, n, alpha, epsilon)?;
    Ok(grid_from_lambda_max(lambda_max, size))
}

/// `{0} ∪ logspace(lambda_max * 1e-4, lambda_max, size - 1)`, or `{0}` alone
/// when `lambda_max` is zero.
pub(crate) fn grid_from_lambda_max(lambda_max: f64, size: usize) -> Vec<f64> {
    if lambda_max == 0.0 {
        return vec![0.0];
    }
    let mut grid = Vec::with_capacity(size);
    grid.push(0.0);
    if size == 2 {
        grid.push(lambda_max);
        return grid;
    }
    let points = size - 1;
    for i in 0..points {
        let exponent = -4.0 + 4.0 * i as f64 / (points - 1) as f64;
        grid.push(lambda_max * 10f64.powf(exponent));
    }
    grid
}

/// Everything needed to score a spectrum-mapped estimate on one fold without
/// touching the data again: the training spectrum and the held-out energy in
/// each training eigendirection.
pub(crate) struct PreparedFold {
    pub n_train: usize,
    pub n_heldout: usize,
    pub d_train: Vec<f64>,
    pub energy: Vec<f64>,
    pub alpha_train: f64,
}

impl PreparedFold {
    /// `(n_k/2) (sum ln e_i + sum g_i / e_i)`; infinite when the mapped
    /// spectrum is not positive definite.
    pub fn score(&self, e: &[f64]) -> f64 {
        let mut ln_det = 0.0;
        let mut trace = 0.0;
        for (&ei, &gi) in e.iter().zip(&self.energy) {
            if !(ei > 0.0) || !ei.is_finite() {
                return f64::INFINITY;
            }
            ln_det += ei.ln();
            trace += gi / ei;
        }
        0.5 * self.n_heldout as f64 * (ln_det + trace)
    }
}

pub(crate) fn prepare_folds(
    data: ArrayView2<'_, f64>,
    plan: &FoldPlan,
    center: CenterMode,
) -> Result<Vec<PreparedFold>> {
    let (n, p) = data.dim();
    if plan.len() != n {
        return Err(Error::InvalidInput(format!(
            "fold plan covers {} rows but data has {n}",
            plan.len()
        )));
    }
    let mut folds = Vec::with_capacity(plan.k());
    for fold in 0..plan.k() {
        let train_idx = plan.train_indices(fold);
        let held_idx = plan.heldout_indices(fold);
        let train = select_rows(data, &train_idx);
        let s_train = sample_covariance(train.view())?;
        let spectrum = eig_sym(&s_train)?;
        let d_train = psd_eigenvalues(&spectrum)?;
        let alpha_train = alpha_hat(&s_train)?;
        let center_vec: Array1<f64> = match center {
            CenterMode::TrainMean => train.mean_axis(Axis(0)).expect("nonempty training fold"),
            CenterMode::Zero => Array1::zeros(p),
        };
        let mut energy = vec![0.0; p];
        let q = spectrum.eigenvectors();
        for &row in &held_idx {
            let dev = &data.row(row) - &center_vec;
            let proj = q.t().dot(&dev);
            for (g, c) in energy.iter_mut().zip(proj.iter()) {
                *g += c * c;
            }
        }
        let nk = held_idx.len() as f64;
        for g in &mut energy {
            *g /= nk;
        }
        folds.push(PreparedFold {
            n_train: train_idx.len(),
            n_heldout: held_idx.len(),
            d_train,
            energy,
            alpha_train,
        });
    }
    Ok(folds)
}

fn select_rows(data: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    let p = data.ncols();
    let mut out = Array2::zeros((rows.len(), p));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&data.row(src));
    }
    out
}

fn validate_grid(grid: &[f64], minimum: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty parameter grid".into()));
    }
    if grid.iter().any(|v| !v.is_finite() || *v < minimum) {
        return Err(Error::InvalidInput(format!(
            "grid values must be finite and >= {minimum}"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) && grid.len() > 1 {
        return Err(Error::InvalidInput(
            "grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

fn pick_minimum(grid: &[f64], mean_scores: &[f64]) -> f64 {
    let mut best = 0usize;
    for (i, &s) in mean_scores.iter().enumerate() {
        if s < mean_scores[best] {
            best = i;
        }
    }
    debug_assert!(mean_scores.iter().all(|&s| s >= mean_scores[best]));
    grid[best]
}

/// Selects the CERNN penalty strength minimizing the average predictive
/// negative loglikelihood over `k` folds (normalized by `1/n`). Each fold
/// refits the scale constant and the sample spectrum on its training rows.
/// Ties break toward the smaller penalty.
pub fn cv_select_lambda(
    data: ArrayView2<'_, f64>,
    k: usize,
    grid: &[f64],
    seed: u64,
    center: CenterMode,
) -> Result<CvResult> {
    validate_grid(grid, 0.0)?;
    let n = data.nrows();
    let plan = make_folds(n, k, seed)?;
    let folds = prepare_folds(data, &plan, center)?;
    let mut mean_scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for fold in &folds {
            let params = CernnParams::new(fold.n_train as f64, lambda, fold.alpha_train)?;
            let e: Vec<f64> = fold
                .d_train
                .iter()
                .map(|&d| cernn_eigenvalue(d, &params))
                .collect::<Result<_>>()?;
            total += fold.score(&e);
        }
        mean_scores.push(total / n as f64);
    }
    let chosen = pick_minimum(grid, &mean_scores);
    Ok(CvResult {
        grid: grid.to_vec(),
        mean_scores,
        chosen,
    })
}

/// Selects the CNR condition-number cap by the same predictive negative
/// loglikelihood criterion. The training spectrum is floored at a small
/// positive fraction of its largest eigenvalue so rank-deficient folds stay
/// inside the CNR model.
pub fn cv_select_cnr(
    data: ArrayView2<'_, f64>,
    k: usize,
    grid: &[f64],
    seed: u64,
    center: CenterMode,
) -> Result<CvResult> {
    validate_grid(grid, 1.0)?;
    let n = data.nrows();
    let plan = make_folds(n, k, seed)?;
    let folds = prepare_folds(data, &plan, center)?;
    let floored: Vec<Vec<f64>> = folds
        .iter()
        .map(|f| floored_eigenvalues(&f.d_train, 1e-12))
        .collect::<Result<_>>()?;
    let mut mean_scores = Vec::with_capacity(grid.len());
    for &kappa in grid {
        let mut total = 0.0;
        for (fold, d) in folds.iter().zip(&floored) {
            let (e, _) = cnr_eigenvalues(d, kappa)?;
            total += fold.score(&e);
        }
        mean_scores.push(total / n as f64);
    }
    let chosen = pick_minimum(grid, &mean_scores);
    Ok(CvResult {
        grid: grid.to_vec(),
        mean_scores,
        chosen,
    })
}

/// Anything that assigns a class id to a feature vector.
pub trait Classifier {
    fn classify(&self, x: ArrayView1<'_, f64>) -> usize;
}

/// Chosen per-slot parameters and the held-out misclassification rate they
/// achieve.
#[derive(Debug, Clone)]
pub struct SupervisedCvResult {
    pub params: Vec<f64>,
    pub cv_error: f64,
}

/// Supervised selection of one parameter per grid slot by held-out
/// misclassification on stratified folds.
///
/// Slots are optimized by a single pass of coordinate descent: each slot
/// starts at its grid midpoint, and slots are scanned in order with the
/// others held at their current values. Ties break toward the smaller
/// parameter. For a per-class penalty pass one grid per class; for a single
/// shared parameter pass one grid.
pub fn cv_select_supervised<C, F>(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    k: usize,
    grids: &[Vec<f64>],
    seed: u64,
    fitter: F,
) -> Result<SupervisedCvResult>
where
    C: Classifier,
    F: Fn(ArrayView2<'_, f64>, &[usize], &[f64]) -> Result<C>,
{
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "label count {} does not match row count {n}",
            labels.len()
        )));
    }
    if n_classes < 2 {
        return Err(Error::Stratification(
            "supervised selection needs at least two classes".into(),
        ));
    }
    if grids.is_empty() {
        return Err(Error::InvalidInput("no parameter grids supplied".into()));
    }
    for grid in grids {
        validate_grid(grid, 0.0)?;
    }
    let plan = make_stratified_folds(labels, n_classes, k, seed)?;
    let splits: Vec<(Array2<f64>, Vec<usize>, Vec<usize>)> = (0..k)
        .map(|fold| {
            let train_idx = plan.train_indices(fold);
            let train = select_rows(features, &train_idx);
            let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            (train, train_labels, plan.heldout_indices(fold))
        })
        .collect();

    let cv_error = |params: &[f64]| -> Result<f64> {
        let mut wrong = 0usize;
        for (train, train_labels, held) in &splits {
            let model = fitter(train.view(), train_labels, params)?;
            for &row in held {
                if model.classify(features.row(row)) != labels[row] {
                    wrong += 1;
                }
            }
        }
        Ok(wrong as f64 / n as f64)
    };

    let mut params: Vec<f64> = grids.iter().map(|g| g[g.len() / 2]).collect();
    let mut final_error = f64::INFINITY;
    for slot in 0..grids.len() {
        let mut best_value = params[slot];
        let mut best_error = f64::INFINITY;
        for &candidate in &grids[slot] {
            params[slot] = candidate;
            let err = cv_error(&params)?;
            if err < best_error {
                best_error = err;
                best_value = candidate;
            }
        }
        params[slot] = best_value;
        final_error = best_error;
    }
    Ok(SupervisedCvResult {
        params,
        cv_error: final_error,
    })
}
