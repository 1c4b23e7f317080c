//! Gaussian mixture EM with a covariance-regularized M-step.
//!
//! The E-step computes responsibilities in log space. The M-step updates the
//! mixture weights and means in closed form and solves the penalized
//! covariance subproblem exactly with the CERNN map applied to the weighted
//! class scatter, using the cluster weight as the effective sample size.
//! Each cluster's mixture constant is re-matched to its scatter's scale
//! every iteration unless frozen.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::shrinkage::{alpha_hat, cernn_estimate, CernnParams, CovarianceEstimate, MethodParams};
use crate::spectral::{sample_covariance, SymMatrix};

use super::discriminant::{GaussianClass, LN_2PI};

/// Posterior membership weights: `w[[i, k]]` is the probability that row `i`
/// belongs to cluster `k`. Rows sum to one; column sums are the effective
/// cluster weights.
#[derive(Debug, Clone)]
pub struct Responsibilities {
    w: Array2<f64>,
    column_sums: Array1<f64>,
}

impl Responsibilities {
    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn column_sums(&self) -> &Array1<f64> {
        &self.column_sums
    }

    /// Most probable cluster per row; ties break toward the smaller id.
    pub fn hard_assignments(&self) -> Vec<usize> {
        self.w
            .outer_iter()
            .map(|row| {
                let mut best = 0usize;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Mixture parameters after fitting.
#[derive(Debug, Clone)]
pub struct MixtureState {
    pub classes: Vec<GaussianClass>,
    pub iteration: usize,
    pub objective: f64,
}

/// EM configuration. `freeze_alpha_after` stops re-matching the per-cluster
/// mixture constants once that many M-steps have run, which restores the
/// exact MAP-EM ascent guarantee from that point on.
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub n_clusters: usize,
    pub lambda: f64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub freeze_alpha_after: Option<usize>,
}

impl EmConfig {
    pub fn new(n_clusters: usize, lambda: f64, restarts: usize, seed: u64) -> Self {
        Self {
            n_clusters,
            lambda,
            restarts,
            max_iter: 500,
            tol: 1e-7,
            seed,
            freeze_alpha_after: None,
        }
    }
}

/// Result of the best restart.
#[derive(Debug)]
pub struct EmFit {
    pub state: MixtureState,
    pub responsibilities: Responsibilities,
    /// Penalized observed objective before each M-step (and after the last).
    pub objective_trace: Vec<f64>,
    pub selected_restart: usize,
    /// Expected complete-data loglikelihood at the final parameters; restarts
    /// are ranked by this value.
    pub expected_loglik: f64,
}

/// k-means++ seeding: the first center is uniform over the rows, each later
/// center is drawn with probability proportional to the squared distance to
/// the closest center already chosen.
pub fn kmeanspp_init<R: Rng + ?Sized>(
    data: ArrayView2<'_, f64>,
    c: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let (n, p) = data.dim();
    if c == 0 || c > n {
        return Err(Error::InvalidInput(format!(
            "cluster count must satisfy 1 <= c <= n, got c = {c}, n = {n}"
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(c);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.row(i), data.row(first)))
        .collect();
    while chosen.len() < c {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = None;
            for (i, &w) in dist2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                last_positive = Some(i);
                acc += w;
                if u < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.or(last_positive).expect("total > 0")
        } else {
            // Remaining rows coincide with chosen centers; take the first
            // untaken row so c = n still selects every point.
            (0..n).find(|&i| !taken[i]).unwrap_or(0)
        };
        chosen.push(next);
        taken[next] = true;
        for (i, d) in dist2.iter_mut().enumerate() {
            let cand = squared_distance(data.row(i), data.row(next));
            if cand < *d {
                *d = cand;
            }
        }
    }
    let mut out = Array2::zeros((c, p));
    for (dst, &src) in chosen.iter().enumerate() {
        out.row_mut(dst).assign(&data.row(src));
    }
    Ok(out)
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The observed-data penalized objective of a fitted state:
/// `sum_i ln sum_k pi_k phi(y_i | mu_k, Sigma_k)` minus
/// `(lambda/2) sum_k [alpha_k ||Sigma_k||_* + (1-alpha_k) ||Sigma_k^{-1}||_*]`,
/// with `lambda` and `alpha_k` read from each class's estimate record.
pub fn penalized_objective(state: &MixtureState, data: ArrayView2<'_, f64>) -> Result<f64> {
    if state.classes.is_empty() {
        return Err(Error::InvalidInput("mixture has no classes".into()));
    }
    let total_prior: f64 = state.classes.iter().map(|c| c.prior()).sum();
    if (total_prior - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "mixture weights sum to {total_prior}, expected 1"
        )));
    }
    let mut loglik = 0.0;
    let mut scores = vec![f64::NEG_INFINITY; state.classes.len()];
    for row in data.outer_iter() {
        for (score, class) in scores.iter_mut().zip(&state.classes) {
            *score = if class.prior() > 0.0 {
                class.prior().ln() + class.log_density(row)
            } else {
                f64::NEG_INFINITY
            };
        }
        loglik += log_sum_exp(&scores);
    }
    Ok(loglik - penalty_term(&state.classes))
}

fn penalty_term(classes: &[GaussianClass]) -> f64 {
    let mut acc = 0.0;
    for class in classes {
        let (lambda, alpha) = match class.covariance().params() {
            MethodParams::Cernn { lambda, alpha, .. } => (*lambda, *alpha),
            _ => continue,
        };
        if lambda == 0.0 {
            continue;
        }
        let mut nuclear = 0.0;
        let mut nuclear_inv = 0.0;
        for &e in class.covariance().spectrum().eigenvalues() {
            nuclear += e;
            nuclear_inv += 1.0 / e;
        }
        acc += 0.5 * lambda * (alpha * nuclear + (1.0 - alpha) * nuclear_inv);
    }
    acc
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    max + sum.ln()
}

/// Scale-matched mixture constant for a weighted scatter; degenerate
/// single-point scatters (zero trace) fall back to the symmetric constant.
fn alpha_for_scatter(s: &SymMatrix) -> f64 {
    alpha_hat(s).unwrap_or(0.5)
}

struct EmRun {
    priors: Vec<f64>,
    means: Vec<Array1<f64>>,
    covariances: Vec<CovarianceEstimate>,
    alphas: Vec<f64>,
}

struct RunOutcome {
    run: EmRun,
    responsibilities: Responsibilities,
    trace: Vec<f64>,
    iterations: usize,
    expected_loglik: f64,
}

/// Fits a `c`-component Gaussian mixture with the covariance-regularized
/// M-step, keeping the restart with the greatest expected complete-data
/// loglikelihood. Deterministic for a fixed seed at any thread count.
pub fn em_cluster(data: ArrayView2<'_, f64>, config: &EmConfig) -> Result<EmFit> {
    let (n, _p) = data.dim();
    let c = config.n_clusters;
    if c == 0 || c > n {
        return Err(Error::InvalidInput(format!(
            "cluster count must satisfy 1 <= c <= n, got c = {c}, n = {n}"
        )));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    if !(config.lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be >= 0, got {}",
            config.lambda
        )));
    }
    let s_full = sample_covariance(data)?;
    let alpha0 = alpha_for_scatter(&s_full);
    let params0 = CernnParams::new(n as f64, config.lambda, alpha0)?;
    let cov0 = cernn_estimate(&s_full, &params0)?;
    if cov0.spectrum().eigenvalues()[cov0.dim() - 1] <= 0.0 {
        return Err(Error::Singular(
            "initial covariance is singular; use lambda > 0".into(),
        ));
    }

    let outcomes: Vec<RunOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = substream(config.seed, restart as u64);
            run_em_once(data, config, &cov0, alpha0, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut best = 0usize;
    for (i, outcome) in outcomes.iter().enumerate() {
        if outcome.expected_loglik > outcomes[best].expected_loglik {
            best = i;
        }
    }
    let selected = outcomes.into_iter().nth(best).expect("nonempty restarts");
    let mut classes = Vec::with_capacity(c);
    for ((prior, mean), cov) in selected
        .run
        .priors
        .iter()
        .zip(selected.run.means.iter())
        .zip(selected.run.covariances.iter())
    {
        classes.push(GaussianClass::new(*prior, mean.clone(), cov.clone())?);
    }
    let objective = *selected.trace.last().expect("at least one iteration");
    Ok(EmFit {
        state: MixtureState {
            classes,
            iteration: selected.iterations,
            objective,
        },
        responsibilities: selected.responsibilities,
        objective_trace: selected.trace,
        selected_restart: best,
        expected_loglik: selected.expected_loglik,
    })
}

fn run_em_once<R: Rng + ?Sized>(
    data: ArrayView2<'_, f64>,
    config: &EmConfig,
    cov0: &CovarianceEstimate,
    alpha0: f64,
    rng: &mut R,
) -> Result<RunOutcome> {
    let c = config.n_clusters;
    let seeds = kmeanspp_init(data, c, rng)?;
    let mut run = EmRun {
        priors: vec![1.0 / c as f64; c],
        means: (0..c).map(|k| seeds.row(k).to_owned()).collect(),
        covariances: vec![cov0.clone(); c],
        alphas: vec![alpha0; c],
    };

    let mut trace = Vec::new();
    let mut m_steps = 0usize;
    let (mut resp, mut obj, mut eloglik) = e_step(data, &run)?;
    trace.push(obj);
    loop {
        if m_steps >= config.max_iter {
            break;
        }
        m_step(data, config, &mut run, &resp, m_steps)?;
        let (next_resp, next_obj, next_eloglik) = e_step(data, &run)?;
        resp = next_resp;
        eloglik = next_eloglik;
        m_steps += 1;
        trace.push(next_obj);
        let change = (next_obj - obj).abs();
        obj = next_obj;
        if change <= config.tol * (1.0 + obj.abs()) {
            break;
        }
    }
    Ok(RunOutcome {
        run,
        responsibilities: resp,
        trace,
        iterations: m_steps,
        expected_loglik: eloglik,
    })
}

/// Log-space E-step. Returns the responsibilities, the penalized observed
/// objective at the current parameters, and the expected complete-data
/// loglikelihood.
fn e_step(data: ArrayView2<'_, f64>, run: &EmRun) -> Result<(Responsibilities, f64, f64)> {
    let n = data.nrows();
    let c = run.priors.len();
    let mut w = Array2::zeros((n, c));
    let mut loglik = 0.0;
    let mut eloglik = 0.0;
    let mut scores = vec![f64::NEG_INFINITY; c];
    let dens: Vec<ClusterDensity> = run
        .covariances
        .iter()
        .zip(&run.means)
        .map(|(cov, mean)| ClusterDensity::new(cov, mean))
        .collect::<Result<_>>()?;
    for (i, row) in data.outer_iter().enumerate() {
        for k in 0..c {
            scores[k] = if run.priors[k] > 0.0 {
                run.priors[k].ln() + dens[k].log_density(row)
            } else {
                f64::NEG_INFINITY
            };
        }
        let lse = log_sum_exp(&scores);
        if !lse.is_finite() {
            return Err(Error::Numerical(format!(
                "log-likelihood of row {i} is not finite"
            )));
        }
        loglik += lse;
        for k in 0..c {
            let wik = if scores[k] == f64::NEG_INFINITY {
                0.0
            } else {
                (scores[k] - lse).exp()
            };
            w[[i, k]] = wik;
            if wik > 0.0 {
                eloglik += wik * scores[k];
            }
        }
    }
    let column_sums = w.sum_axis(Axis(0));
    let mut penalty_classes = Vec::with_capacity(c);
    for k in 0..c {
        penalty_classes.push((run.covariances[k].clone(), run.alphas[k]));
    }
    let penalty = penalty_from_parts(&penalty_classes);
    Ok((Responsibilities { w, column_sums }, loglik - penalty, eloglik))
}

fn penalty_from_parts(parts: &[(CovarianceEstimate, f64)]) -> f64 {
    let mut acc = 0.0;
    for (cov, alpha) in parts {
        let lambda = match cov.params() {
            MethodParams::Cernn { lambda, .. } => *lambda,
            _ => 0.0,
        };
        if lambda == 0.0 {
            continue;
        }
        let mut nuclear = 0.0;
        let mut nuclear_inv = 0.0;
        for &e in cov.spectrum().eigenvalues() {
            nuclear += e;
            nuclear_inv += 1.0 / e;
        }
        acc += 0.5 * lambda * (alpha * nuclear + (1.0 - alpha) * nuclear_inv);
    }
    acc
}

/// Cached per-cluster quantities for density evaluation.
struct ClusterDensity<'a> {
    cov: &'a CovarianceEstimate,
    mean: &'a Array1<f64>,
    ln_det: f64,
}

impl<'a> ClusterDensity<'a> {
    fn new(cov: &'a CovarianceEstimate, mean: &'a Array1<f64>) -> Result<Self> {
        let ln_det = cov.spectrum().ln_det()?;
        Ok(Self { cov, mean, ln_det })
    }

    fn log_density(&self, x: ArrayView1<'_, f64>) -> f64 {
        let p = self.mean.len() as f64;
        let dev = &x - self.mean;
        let quad = self
            .cov
            .spectrum()
            .inverse_quadratic_form(dev.view())
            .expect("spectrum validated positive definite");
        -0.5 * (p * LN_2PI + self.ln_det + quad)
    }
}

const EMPTY_CLUSTER_WEIGHT: f64 = 1e-12;

fn m_step(
    data: ArrayView2<'_, f64>,
    config: &EmConfig,
    run: &mut EmRun,
    resp: &Responsibilities,
    m_step_index: usize,
) -> Result<()> {
    let (n, p) = data.dim();
    let c = run.priors.len();
    let refresh_alpha = match config.freeze_alpha_after {
        Some(limit) => m_step_index < limit,
        None => true,
    };
    for k in 0..c {
        let wk = resp.column_sums[k];
        run.priors[k] = wk / n as f64;
        if wk <= EMPTY_CLUSTER_WEIGHT {
            // Empty cluster: freeze its mean and covariance.
            continue;
        }
        let mut mean = Array1::<f64>::zeros(p);
        for (i, row) in data.outer_iter().enumerate() {
            let wik = resp.w[[i, k]];
            if wik > 0.0 {
                mean.scaled_add(wik, &row);
            }
        }
        mean /= wk;
        let mut scatter = Array2::<f64>::zeros((p, p));
        let mut dev = vec![0.0; p];
        for (i, row) in data.outer_iter().enumerate() {
            let wik = resp.w[[i, k]];
            if wik == 0.0 {
                continue;
            }
            for (d, (x, m)) in dev.iter_mut().zip(row.iter().zip(mean.iter())) {
                *d = x - m;
            }
            for a in 0..p {
                let wa = wik * dev[a];
                if wa == 0.0 {
                    continue;
                }
                for b in a..p {
                    scatter[[a, b]] += wa * dev[b];
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                let v = scatter[[a, b]] / wk;
                scatter[[a, b]] = v;
                scatter[[b, a]] = v;
            }
        }
        let s_k = SymMatrix::new(scatter)?;
        if refresh_alpha {
            run.alphas[k] = alpha_for_scatter(&s_k);
        }
        let params = CernnParams::new(wk, config.lambda, run.alphas[k])?;
        run.covariances[k] = cernn_estimate(&s_k, &params)?;
        run.means[k] = mean;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;

    fn small_blobs() -> Array2<f64> {
        array![
            [0.0, 0.0],
            [0.2, -0.1],
            [-0.1, 0.15],
            [0.1, 0.1],
            [8.0, 8.1],
            [8.2, 7.9],
            [7.9, 8.05],
            [8.1, 8.2]
        ]
    }

    #[test]
    fn kmeanspp_single_cluster_picks_one_row() {
        let data = small_blobs();
        let mut rng = substream(3, 0);
        let seeds = kmeanspp_init(data.view(), 1, &mut rng).unwrap();
        assert_eq!(seeds.nrows(), 1);
        let found = data
            .outer_iter()
            .any(|row| row.iter().zip(seeds.row(0).iter()).all(|(a, b)| a == b));
        assert!(found);
    }

    #[test]
    fn kmeanspp_c_equals_n_selects_every_row() {
        let data = small_blobs();
        let mut rng = substream(5, 0);
        let seeds = kmeanspp_init(data.view(), data.nrows(), &mut rng).unwrap();
        for row in data.outer_iter() {
            let found = seeds
                .outer_iter()
                .any(|s| s.iter().zip(row.iter()).all(|(a, b)| a == b));
            assert!(found);
        }
    }

    #[test]
    fn kmeanspp_splits_far_clusters() {
        let data = small_blobs();
        let mut hits = 0;
        for seed in 0..200u64 {
            let mut rng = substream(seed, 9);
            let seeds = kmeanspp_init(data.view(), 2, &mut rng).unwrap();
            let one_low = seeds.row(0)[0] < 4.0;
            let two_low = seeds.row(1)[0] < 4.0;
            if one_low != two_low {
                hits += 1;
            }
        }
        assert!(hits >= 198, "split in only {hits}/200 runs");
    }

    #[test]
    fn single_cluster_lambda_zero_recovers_mle() {
        let data = small_blobs();
        let config = EmConfig::new(1, 0.0, 1, 11);
        let fit = em_cluster(data.view(), &config).unwrap();
        let class = &fit.state.classes[0];
        assert_abs_diff_eq!(class.prior(), 1.0, epsilon = 1e-15);
        let mean = data.mean_axis(Axis(0)).unwrap();
        for (a, b) in class.mean().iter().zip(mean.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let s = sample_covariance(data.view()).unwrap();
        for (a, b) in class
            .covariance()
            .matrix()
            .as_array()
            .iter()
            .zip(s.as_array().iter())
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_cluster_with_penalty_matches_direct_estimate() {
        let data = small_blobs();
        let lambda = 2.5;
        let config = EmConfig::new(1, lambda, 1, 13);
        let fit = em_cluster(data.view(), &config).unwrap();
        let s = sample_covariance(data.view()).unwrap();
        let alpha = alpha_hat(&s).unwrap();
        let params = CernnParams::new(data.nrows() as f64, lambda, alpha).unwrap();
        let direct = cernn_estimate(&s, &params).unwrap();
        for (a, b) in fit.state.classes[0]
            .covariance()
            .matrix()
            .as_array()
            .iter()
            .zip(direct.matrix().as_array().iter())
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn responsibilities_and_priors_normalize() {
        let data = small_blobs();
        let config = EmConfig::new(2, 1.0, 4, 17);
        let fit = em_cluster(data.view(), &config).unwrap();
        for row in fit.responsibilities.weights().outer_iter() {
            let sum: f64 = row.sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let total: f64 = fit.state.classes.iter().map(|c| c.prior()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for class in &fit.state.classes {
            let smallest =
                class.covariance().spectrum().eigenvalues()[class.covariance().dim() - 1];
            assert!(smallest > 0.0);
        }
    }

    #[test]
    fn em_is_deterministic_for_fixed_seed() {
        let data = small_blobs();
        let config = EmConfig::new(2, 0.5, 6, 23);
        let a = em_cluster(data.view(), &config).unwrap();
        let b = em_cluster(data.view(), &config).unwrap();
        assert_eq!(a.selected_restart, b.selected_restart);
        assert_eq!(a.expected_loglik, b.expected_loglik);
        assert_eq!(a.objective_trace, b.objective_trace);
        for (ca, cb) in a.state.classes.iter().zip(&b.state.classes) {
            assert_eq!(ca.prior(), cb.prior());
            for (x, y) in ca.mean().iter().zip(cb.mean().iter()) {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn objective_matches_public_evaluation() {
        let data = small_blobs();
        let config = EmConfig::new(2, 1.5, 3, 29);
        let fit = em_cluster(data.view(), &config).unwrap();
        let recomputed = penalized_objective(&fit.state, data.view()).unwrap();
        assert_relative_eq!(recomputed, fit.state.objective, max_relative = 1e-10);
    }

    #[test]
    fn objective_with_zero_penalty_is_plain_loglikelihood() {
        let data = small_blobs();
        let s = SymMatrix::scaled_identity(2, 3.0);
        let cov = cernn_estimate(&s, &CernnParams::new(8.0, 0.0, 0.4).unwrap()).unwrap();
        let class = GaussianClass::new(1.0, Array1::zeros(2), cov).unwrap();
        let state = MixtureState {
            classes: vec![class],
            iteration: 0,
            objective: 0.0,
        };
        let obj = penalized_objective(&state, data.view()).unwrap();
        let mut loglik = 0.0;
        for row in data.outer_iter() {
            loglik += state.classes[0].log_density(row);
        }
        assert_relative_eq!(obj, loglik, max_relative = 1e-12);
    }

    #[test]
    fn objective_penalty_closed_form_for_scaled_identity() {
        // With Sigma = m I the penalty is (lambda/2) p (alpha m + (1-alpha)/m).
        let data = small_blobs();
        let m = 3.0;
        let alpha = 0.4;
        let lambda = 2.0;
        let s = SymMatrix::scaled_identity(2, m);
        // lambda = 0 map leaves the matrix at exactly m I; re-tag the record
        // with the working penalty by refitting at a huge weight so the
        // eigenvalues stay at m to high accuracy.
        let cov = cernn_estimate(&s, &CernnParams::new(1e12, lambda, alpha).unwrap()).unwrap();
        let class = GaussianClass::new(1.0, Array1::zeros(2), cov).unwrap();
        let state = MixtureState {
            classes: vec![class],
            iteration: 0,
            objective: 0.0,
        };
        let obj = penalized_objective(&state, data.view()).unwrap();
        let mut loglik = 0.0;
        for row in data.outer_iter() {
            loglik += state.classes[0].log_density(row);
        }
        let penalty = 0.5 * lambda * 2.0 * (alpha * m + (1.0 - alpha) / m);
        assert_relative_eq!(obj, loglik - penalty, max_relative = 1e-6);
    }

    #[test]
    fn objective_handles_empty_cluster_without_nan() {
        let data = small_blobs();
        let s = sample_covariance(data.view()).unwrap();
        let alpha = alpha_hat(&s).unwrap();
        let params = CernnParams::new(8.0, 1.0, alpha).unwrap();
        let cov = cernn_estimate(&s, &params).unwrap();
        let live = GaussianClass::new(1.0, Array1::zeros(2), cov.clone()).unwrap();
        let dead = GaussianClass::new(0.0, Array1::zeros(2), cov).unwrap();
        let state = MixtureState {
            classes: vec![live, dead],
            iteration: 0,
            objective: 0.0,
        };
        let obj = penalized_objective(&state, data.view()).unwrap();
        assert!(obj.is_finite());
    }

    #[test]
    fn ascent_holds_with_frozen_alpha() {
        let data = small_blobs();
        let mut config = EmConfig::new(3, 10.0, 1, 31);
        config.freeze_alpha_after = Some(3);
        config.max_iter = 60;
        let fit = em_cluster(data.view(), &config).unwrap();
        let trace = &fit.objective_trace;
        for i in 3..trace.len().saturating_sub(1) {
            assert!(
                trace[i + 1] >= trace[i] - 1e-8 * (1.0 + trace[i].abs()),
                "objective decreased at iteration {i}: {} -> {}",
                trace[i],
                trace[i + 1]
            );
        }
    }
}
