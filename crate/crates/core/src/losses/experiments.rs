//! Simulation harnesses: sample-eigenvalue dispersion, condition-number
//! solution paths, and the bimodal-spectrum loss-ratio study.
//!
//! Trials run on independent RNG substreams and are aggregated in trial
//! order, so results are identical at any thread count.

use ndarray::Array1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::losses::{loss_report, sample_mvn, LossReport};
use crate::rng::{derive_seed, substream};
use crate::selection::{prepare_folds, make_folds, CenterMode};
use crate::shrinkage::{
    alpha_hat, cernn_eigenvalue, cnr_eigenvalues, floored_eigenvalues, psd_eigenvalues,
    CernnParams, Method,
};
use crate::spectral::{eig_sym, sample_covariance, SymMatrix};

/// Grid resolution used by the in-harness cross-validation searches.
const CV_GRID_SIZE: usize = 20;
/// Relative floor applied to rank-deficient spectra before CNR fitting.
const CNR_SPECTRUM_FLOOR: f64 = 1e-12;
/// Largest condition-number cap explored by the CNR grid.
const CNR_KAPPA_CEILING: f64 = 1e6;

/// Configuration of the sample-eigenvalue dispersion experiment.
#[derive(Debug, Clone)]
pub struct DispersionSpec {
    pub p: usize,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl DispersionSpec {
    /// Defaults: p = 10, n in {5, 10, 20, 50, 100, 500}, 100 trials.
    pub fn new(seed: u64) -> Self {
        Self {
            p: 10,
            n_list: vec![5, 10, 20, 50, 100, 500],
            trials: 100,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::InvalidInput(
                "every sample size must be >= 2".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sorted sample-covariance eigenvalues for one (sample size, trial) cell.
#[derive(Debug, Clone)]
pub struct DispersionRow {
    pub n: usize,
    pub trial: usize,
    pub eigenvalues: Vec<f64>,
}

/// Draws `N(0, I_p)` samples for each configured size and reports the sorted
/// sample spectrum per trial. Eigenvalues below the numerical-rank cut
/// (`1e-10` of the largest) are reported as exact zeros.
pub fn dispersion_experiment(spec: &DispersionSpec) -> Result<Vec<DispersionRow>> {
    spec.validate()?;
    let cov = SymMatrix::identity(spec.p);
    let mean = Array1::zeros(spec.p);
    let cells: Vec<(usize, usize, usize)> = spec
        .n_list
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..spec.trials).map(move |trial| (ni, n, trial)))
        .collect();
    cells
        .par_iter()
        .map(|&(ni, n, trial)| {
            let stream = (ni * spec.trials + trial) as u64;
            let mut rng = substream(spec.seed, stream);
            let data = sample_mvn(mean.view(), &cov, n, &mut rng)?;
            let s = sample_covariance(data.view())?;
            let spectrum = eig_sym(&s)?;
            let top = spectrum.eigenvalues()[0].max(0.0);
            let cut = 1e-10 * top;
            let eigenvalues = spectrum
                .eigenvalues()
                .iter()
                .map(|&e| if e.abs() <= cut { 0.0 } else { e })
                .collect();
            Ok(DispersionRow {
                n,
                trial,
                eigenvalues,
            })
        })
        .collect()
}

/// One matched point on a solution path: the parameter that gives the target
/// condition number and the resulting spectrum.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub kappa: f64,
    pub method: Method,
    pub parameter: f64,
    pub eigenvalues: Vec<f64>,
}

/// For each target condition number, adjusts each method's parameter so the
/// shrunken spectrum has exactly that condition number, and reports the
/// resulting eigenvalues.
///
/// CERNN (with the scale-matched mixture constant) and linear shrinkage
/// (toward the mean eigenvalue) are matched by bisection; CNR takes the
/// target as its cap directly, which is exact whenever the cap binds.
pub fn path_at_condition_number(d: &[f64], kappa_targets: &[f64]) -> Result<Vec<PathPoint>> {
    if d.len() < 2 {
        return Err(Error::InvalidInput(
            "paths need at least two eigenvalues".into(),
        ));
    }
    if d.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidInput(
            "paths require strictly positive eigenvalues".into(),
        ));
    }
    if d.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(
            "eigenvalues must be sorted in descending order".into(),
        ));
    }
    let p = d.len();
    let spread = d[0] / d[p - 1];
    let sigma = d.iter().sum::<f64>() / p as f64;
    let alpha = 1.0 / (1.0 + sigma * sigma);

    let cernn_eigs = |lambda: f64| -> Result<Vec<f64>> {
        let params = CernnParams::new(1.0, lambda, alpha)?;
        d.iter().map(|&di| cernn_eigenvalue(di, &params)).collect()
    };
    let linear_eigs = |gamma: f64| -> Vec<f64> {
        d.iter().map(|&di| (1.0 - gamma) * di + gamma * sigma).collect()
    };
    let cond = |e: &[f64]| e[0] / e[p - 1];

    let mut out = Vec::with_capacity(kappa_targets.len() * 3);
    for &kappa in kappa_targets {
        if !(kappa > 1.0) || kappa > spread * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "target condition number {kappa} outside achievable range (1, {spread}]"
            )));
        }
        if kappa >= spread {
            for method in [Method::Cernn, Method::Linear, Method::Cnr] {
                out.push(PathPoint {
                    kappa,
                    method,
                    parameter: if method == Method::Cnr { kappa } else { 0.0 },
                    eigenvalues: d.to_vec(),
                });
            }
            continue;
        }

        // CERNN: condition number is continuous and decreasing in lambda.
        let mut hi = 1.0;
        while cond(&cernn_eigs(hi)?) > kappa {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        let mut lambda = hi;
        let mut eigs = cernn_eigs(hi)?;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let e = cernn_eigs(mid)?;
            let c = cond(&e);
            lambda = mid;
            eigs = e;
            if (c - kappa).abs() <= 1e-9 * kappa {
                break;
            }
            if c > kappa {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        out.push(PathPoint {
            kappa,
            method: Method::Cernn,
            parameter: lambda,
            eigenvalues: eigs,
        });

        // Linear: same bisection over gamma in [0, 1].
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut gamma = hi;
        let mut eigs = linear_eigs(hi);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let e = linear_eigs(mid);
            let c = cond(&e);
            gamma = mid;
            eigs = e;
            if (c - kappa).abs() <= 1e-9 * kappa {
                break;
            }
            if c > kappa {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.max(1e-300) {
                break;
            }
        }
        out.push(PathPoint {
            kappa,
            method: Method::Linear,
            parameter: gamma,
            eigenvalues: eigs,
        });

        // CNR: the cap binds below the sample spread, so the output condition
        // number equals the cap exactly.
        let (e, _) = cnr_eigenvalues(d, kappa)?;
        out.push(PathPoint {
            kappa,
            method: Method::Cnr,
            parameter: kappa,
            eigenvalues: e,
        });
    }
    Ok(out)
}

/// How many population eigenvalues take the high value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HighFraction {
    /// Exactly one high eigenvalue.
    Singleton,
    /// A fraction of `p` (at most 0.4), rounded to the nearest count.
    Fraction(f64),
}

/// Configuration of the bimodal-spectrum loss-ratio study.
#[derive(Debug, Clone)]
pub struct BimodalSpec {
    pub p: usize,
    pub fraction_high: HighFraction,
    pub upsilon: f64,
    /// Target ratio p/n; the sample size is `round(p / ratio)`.
    pub ratio: f64,
    pub trials: usize,
    pub seed: u64,
}

impl BimodalSpec {
    pub fn new(p: usize, fraction_high: HighFraction, ratio: f64, trials: usize, seed: u64) -> Self {
        Self {
            p,
            fraction_high,
            upsilon: 0.1,
            ratio,
            trials,
            seed,
        }
    }

    /// Derived sample size `round(p / ratio)`.
    pub fn sample_size(&self) -> usize {
        (self.p as f64 / self.ratio).round() as usize
    }

    /// Population eigenvalues: `n_high` copies of `1 - upsilon + upsilon p`
    /// followed by `1 - upsilon`.
    pub fn population_eigenvalues(&self) -> Vec<f64> {
        let high = 1.0 - self.upsilon + self.upsilon * self.p as f64;
        let low = 1.0 - self.upsilon;
        let n_high = match self.fraction_high {
            HighFraction::Singleton => 1,
            HighFraction::Fraction(f) => (f * self.p as f64).round() as usize,
        };
        let mut out = vec![low; self.p];
        for v in out.iter_mut().take(n_high.min(self.p)) {
            *v = high;
        }
        out
    }

    /// Human-readable scenario label used in exported tables.
    pub fn label(&self) -> String {
        let scenario = match self.fraction_high {
            HighFraction::Singleton => "singleton".to_string(),
            HighFraction::Fraction(f) => format!("high{:02}", (f * 100.0).round() as usize),
        };
        format!("{}_p{}_r{}", scenario, self.p, self.ratio)
    }

    fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidInput("dimension must be >= 2".into()));
        }
        if let HighFraction::Fraction(f) = self.fraction_high {
            if !(0.0..=0.4).contains(&f) {
                return Err(Error::InvalidInput(format!(
                    "high fraction must lie in [0, 0.4], got {f}"
                )));
            }
        }
        if !(self.upsilon > 0.0 && self.upsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "upsilon must lie in (0, 1), got {}",
                self.upsilon
            )));
        }
        if self.sample_size() < 2 {
            return Err(Error::InvalidInput(format!(
                "derived sample size {} must be >= 2",
                self.sample_size()
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Estimators compared in the loss-ratio study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMethod {
    Cernn,
    Cnr,
    Lw,
}

impl ExperimentMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentMethod::Cernn => "cernn",
            ExperimentMethod::Cnr => "cnr",
            ExperimentMethod::Lw => "lw",
        }
    }
}

/// Losses of one fitted method in one trial.
#[derive(Debug, Clone)]
pub struct TrialLosses {
    pub trial: usize,
    pub method: ExperimentMethod,
    pub losses: LossReport,
}

/// Mean and standard deviation of per-trial loss ratios against the CERNN
/// fit.
#[derive(Debug, Clone)]
pub struct RatioSummary {
    pub method: ExperimentMethod,
    pub entropy_mean: f64,
    pub entropy_sd: f64,
    pub quadratic_mean: f64,
    pub quadratic_sd: f64,
}

/// Full output of the loss-ratio study.
#[derive(Debug, Clone)]
pub struct BimodalTable {
    pub scenario: String,
    pub records: Vec<TrialLosses>,
    pub summary: Vec<RatioSummary>,
}

/// Per-trial protocol: draw `n` samples from the bimodal population, fit each
/// requested method with its own cross-validated tuning parameter, and score
/// both losses against the truth. Ratios are taken against CERNN, which is
/// always fitted.
pub fn bimodal_experiment(
    spec: &BimodalSpec,
    methods: &[ExperimentMethod],
    cv_folds: usize,
) -> Result<BimodalTable> {
    spec.validate()?;
    let n = spec.sample_size();
    if cv_folds < 2 || cv_folds > n {
        return Err(Error::InvalidInput(format!(
            "fold count must satisfy 2 <= K <= n, got K = {cv_folds}, n = {n}"
        )));
    }
    let omega = spec.population_eigenvalues();
    let truth = SymMatrix::from_diagonal(&omega);
    let mean = Array1::zeros(spec.p);

    let per_trial: Vec<Vec<(ExperimentMethod, LossReport)>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<(ExperimentMethod, LossReport)>> {
            let mut rng = substream(spec.seed, trial as u64);
            let data = sample_mvn(mean.view(), &truth, n, &mut rng)?;
            let s = sample_covariance(data.view())?;
            let spectrum = eig_sym(&s)?;
            let d = psd_eigenvalues(&spectrum)?;
            let alpha = alpha_hat(&s)?;
            let fold_seed = derive_seed(spec.seed, 0x70_6C_61_6E ^ trial as u64);
            let plan = make_folds(n, cv_folds, fold_seed)?;
            let folds = prepare_folds(data.view(), &plan, CenterMode::TrainMean)?;

            // CERNN: penalty grid from the full-data spectrum, scored per fold.
            let grid = crate::selection::lambda_grid(&d, n as f64, alpha, 1e-2, CV_GRID_SIZE)?;
            let mut best_lambda = grid[0];
            let mut best_score = f64::INFINITY;
            for &lambda in &grid {
                let mut total = 0.0;
                for fold in &folds {
                    let params =
                        CernnParams::new(fold.n_train as f64, lambda, fold.alpha_train)?;
                    let e: Vec<f64> = fold
                        .d_train
                        .iter()
                        .map(|&di| cernn_eigenvalue(di, &params))
                        .collect::<Result<_>>()?;
                    total += fold.score(&e);
                }
                if total < best_score {
                    best_score = total;
                    best_lambda = lambda;
                }
            }
            let cernn_params = CernnParams::new(n as f64, best_lambda, alpha)?;
            let cernn_eigs: Vec<f64> = d
                .iter()
                .map(|&di| cernn_eigenvalue(di, &cernn_params))
                .collect::<Result<_>>()?;
            let cernn_fit = spectrum.reconstruct_with(&cernn_eigs);
            let cernn_losses = loss_report(&cernn_fit, &truth)?;

            let mut results = vec![(ExperimentMethod::Cernn, cernn_losses)];
            for &method in methods {
                match method {
                    ExperimentMethod::Cernn => {}
                    ExperimentMethod::Cnr => {
                        let d_floor = floored_eigenvalues(&d, CNR_SPECTRUM_FLOOR)?;
                        let fold_floors: Vec<Vec<f64>> = folds
                            .iter()
                            .map(|f| floored_eigenvalues(&f.d_train, CNR_SPECTRUM_FLOOR))
                            .collect::<Result<_>>()?;
                        let kappa_hi =
                            (d_floor[0] / d_floor[spec.p - 1]).min(CNR_KAPPA_CEILING);
                        let kappa_grid = kappa_logspace(kappa_hi, CV_GRID_SIZE);
                        let mut best_kappa = kappa_grid[0];
                        let mut best_score = f64::INFINITY;
                        for &kappa in &kappa_grid {
                            let mut total = 0.0;
                            for (fold, df) in folds.iter().zip(&fold_floors) {
                                let (e, _) = cnr_eigenvalues(df, kappa)?;
                                total += fold.score(&e);
                            }
                            if total < best_score {
                                best_score = total;
                                best_kappa = kappa;
                            }
                        }
                        let (e, _) = cnr_eigenvalues(&d_floor, best_kappa)?;
                        let fit = spectrum.reconstruct_with(&e);
                        results.push((method, loss_report(&fit, &truth)?));
                    }
                    ExperimentMethod::Lw => {
                        let fit = crate::shrinkage::lw_estimate(data.view())?;
                        results.push((method, loss_report(fit.matrix(), &truth)?));
                    }
                }
            }
            for (_, report) in &results {
                if !report.entropy.is_finite() || !report.quadratic.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss in trial {trial}"
                    )));
                }
            }
            Ok(results)
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (trial, results) in per_trial.iter().enumerate() {
        for (method, losses) in results {
            records.push(TrialLosses {
                trial,
                method: *method,
                losses: *losses,
            });
        }
    }

    let mut summary = Vec::new();
    for &method in methods {
        let mut entropy_ratios = Vec::with_capacity(spec.trials);
        let mut quadratic_ratios = Vec::with_capacity(spec.trials);
        for results in &per_trial {
            let cernn = results
                .iter()
                .find(|(m, _)| *m == ExperimentMethod::Cernn)
                .expect("cernn always fitted")
                .1;
            let this = results
                .iter()
                .find(|(m, _)| *m == method)
                .expect("requested method fitted")
                .1;
            entropy_ratios.push(this.entropy / cernn.entropy);
            quadratic_ratios.push(this.quadratic / cernn.quadratic);
        }
        let (entropy_mean, entropy_sd) = mean_sd(&entropy_ratios);
        let (quadratic_mean, quadratic_sd) = mean_sd(&quadratic_ratios);
        summary.push(RatioSummary {
            method,
            entropy_mean,
            entropy_sd,
            quadratic_mean,
            quadratic_sd,
        });
    }

    Ok(BimodalTable {
        scenario: spec.label(),
        records,
        summary,
    })
}

/// Log-spaced condition-number caps from 1 to `hi` inclusive.
fn kappa_logspace(hi: f64, size: usize) -> Vec<f64> {
    if !(hi > 1.0) {
        return vec![1.0];
    }
    let top = hi.ln();
    (0..size)
        .map(|i| (top * i as f64 / (size - 1) as f64).exp())
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const FIG2_EIGENVALUES: [f64; 5] = [13.29, 5.73, 1.51, 0.55, 0.44];

    #[test]
    fn dispersion_is_deterministic_and_rank_aware() {
        let spec = DispersionSpec {
            p: 10,
            n_list: vec![5],
            trials: 3,
            seed: 77,
        };
        let a = dispersion_experiment(&spec).unwrap();
        let b = dispersion_experiment(&spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.eigenvalues, y.eigenvalues);
        }
        // n = 5 observations in 10 dimensions: rank <= 4 after centering, so
        // at least 6 eigenvalues are exactly zero.
        for row in &a {
            let zeros = row.eigenvalues.iter().filter(|&&e| e == 0.0).count();
            assert!(zeros >= 5, "expected >= 5 exact zeros, got {zeros}");
        }
    }

    #[test]
    fn paths_at_full_spread_return_input() {
        let d = FIG2_EIGENVALUES;
        let spread = d[0] / d[4];
        let points = path_at_condition_number(&d, &[spread]).unwrap();
        assert_eq!(points.len(), 3);
        for point in points {
            assert_eq!(point.eigenvalues, d.to_vec());
        }
    }

    #[test]
    fn paths_match_requested_condition_numbers() {
        let d = FIG2_EIGENVALUES;
        let targets = [25.0, 10.0, 5.0, 2.0];
        let points = path_at_condition_number(&d, &targets).unwrap();
        assert_eq!(points.len(), 12);
        for point in &points {
            let cond = point.eigenvalues[0] / point.eigenvalues[4];
            assert_relative_eq!(cond, point.kappa, max_relative = 1e-6);
        }
    }

    #[test]
    fn paths_near_one_approach_mean_eigenvalue() {
        let d = FIG2_EIGENVALUES;
        let sigma = d.iter().sum::<f64>() / 5.0;
        let points = path_at_condition_number(&d, &[1.0 + 1e-6]).unwrap();
        for point in points {
            for &e in &point.eigenvalues {
                assert_relative_eq!(e, sigma, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn paths_reject_unreachable_targets() {
        let d = [4.0, 2.0];
        assert!(path_at_condition_number(&d, &[0.9]).is_err());
        assert!(path_at_condition_number(&d, &[3.0]).is_err());
    }

    #[test]
    fn bimodal_population_shapes() {
        let spec = BimodalSpec::new(10, HighFraction::Fraction(0.2), 2.0, 1, 5);
        let omega = spec.population_eigenvalues();
        assert_eq!(omega.iter().filter(|&&v| v > 1.0).count(), 2);
        assert_abs_diff_eq!(omega[0], 1.0 - 0.1 + 0.1 * 10.0, epsilon = 1e-15);
        assert_abs_diff_eq!(omega[9], 0.9, epsilon = 1e-15);
        assert_eq!(spec.sample_size(), 5);
    }

    #[test]
    fn bimodal_cernn_only_gives_unit_ratios() {
        let spec = BimodalSpec::new(8, HighFraction::Singleton, 2.0, 3, 13);
        let table = bimodal_experiment(&spec, &[ExperimentMethod::Cernn], 2).unwrap();
        for row in &table.summary {
            assert_eq!(row.entropy_mean, 1.0);
            assert_eq!(row.entropy_sd, 0.0);
            assert_eq!(row.quadratic_mean, 1.0);
            assert_eq!(row.quadratic_sd, 0.0);
        }
        assert_eq!(table.records.len(), 3);
    }

    #[test]
    fn bimodal_runs_all_methods_on_rank_deficient_data() {
        // p > n forces a singular sample covariance; every method must still
        // produce finite losses.
        let spec = BimodalSpec::new(12, HighFraction::Fraction(0.25), 4.0, 2, 99);
        let table = bimodal_experiment(
            &spec,
            &[ExperimentMethod::Cnr, ExperimentMethod::Lw],
            3,
        )
        .unwrap();
        assert_eq!(table.records.len(), 2 * 3);
        for record in &table.records {
            assert!(record.losses.entropy.is_finite());
            assert!(record.losses.quadratic.is_finite());
            assert!(record.losses.entropy >= -1e-10);
            assert!(record.losses.quadratic >= -1e-10);
        }
    }
}
