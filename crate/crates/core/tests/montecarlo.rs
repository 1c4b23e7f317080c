//! Seeded Monte-Carlo behavior checks: consistency-flavored properties with
//! law-of-large-numbers tolerances.

use ndarray::{Array1, Array2};
use rand::Rng;

use cernn_core::applications::{fit_qda, fit_rda, qda_lambda_grids};
use cernn_core::losses::{dispersion_experiment, sample_mvn, DispersionSpec};
use cernn_core::rng::{derive_seed, substream};
use cernn_core::selection::{
    cv_select_lambda, cv_select_supervised, lambda_grid, CenterMode,
};
use cernn_core::shrinkage::{alpha_hat, lw_estimate, MethodParams};
use cernn_core::spectral::{eig_sym, sample_covariance, SymMatrix};
use cernn_core::Error;

#[test]
fn sample_covariance_concentrates_on_identity() {
    let mut rng = substream(201, 0);
    let cov = SymMatrix::identity(2);
    let data = sample_mvn(Array1::zeros(2).view(), &cov, 1000, &mut rng).unwrap();
    let s = sample_covariance(data.view()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!(
                (s.as_array()[[i, j]] - expect).abs() < 0.15,
                "entry ({i},{j}) = {}",
                s.as_array()[[i, j]]
            );
        }
    }
}

#[test]
fn lw_weight_vanishes_with_many_samples() {
    // n = 200 p: the sample covariance is reliable, so the data-driven
    // weight collapses toward zero.
    let p = 10;
    let n = 200 * p;
    let eigenvalues: Vec<f64> = (0..p).map(|i| 3.0 * 0.8f64.powi(i as i32)).collect();
    let cov = SymMatrix::from_diagonal(&eigenvalues);
    let mut rng = substream(203, 0);
    let data = sample_mvn(Array1::zeros(p).view(), &cov, n, &mut rng).unwrap();
    let est = lw_estimate(data.view()).unwrap();
    match est.params() {
        MethodParams::Lw { weight } => {
            assert!(*weight < 0.05, "weight {weight} did not vanish");
        }
        other => panic!("unexpected params {other:?}"),
    }
}

#[test]
fn cv_regularizes_when_dimension_exceeds_samples() {
    // p = 20, n = 10: the unpenalized fit is singular on every training
    // fold, so the chosen penalty must be positive.
    let p = 20;
    let n = 10;
    let cov = SymMatrix::identity(p);
    for seed in 0..5u64 {
        let mut rng = substream(205, seed);
        let data = sample_mvn(Array1::zeros(p).view(), &cov, n, &mut rng).unwrap();
        let s = sample_covariance(data.view()).unwrap();
        let alpha = alpha_hat(&s).unwrap();
        let spectrum = eig_sym(&s).unwrap();
        let d: Vec<f64> = spectrum.eigenvalues().iter().map(|&v| v.max(0.0)).collect();
        let grid = lambda_grid(&d, n as f64, alpha, 1e-2, 12).unwrap();
        let result =
            cv_select_lambda(data.view(), 5, &grid, derive_seed(205, seed), CenterMode::TrainMean)
                .unwrap();
        assert!(result.chosen() > 0.0, "seed {seed} chose lambda = 0");
    }
}

#[test]
fn cv_prefers_weak_penalties_with_abundant_data() {
    // n = 100 p from a well-conditioned population: the chosen penalty lands
    // in the lowest decade of the positive grid most of the time.
    let p = 5;
    let n = 100 * p;
    let eigenvalues = [2.0, 1.5, 1.0, 0.8, 0.6];
    let cov = SymMatrix::from_diagonal(&eigenvalues);
    let trials = 10;
    let mut low_decade = 0;
    for seed in 0..trials {
        let mut rng = substream(207, seed);
        let data = sample_mvn(Array1::zeros(p).view(), &cov, n, &mut rng).unwrap();
        let s = sample_covariance(data.view()).unwrap();
        let alpha = alpha_hat(&s).unwrap();
        let spectrum = eig_sym(&s).unwrap();
        let d: Vec<f64> = spectrum.eigenvalues().to_vec();
        let grid = lambda_grid(&d, n as f64, alpha, 1e-2, 16).unwrap();
        let result =
            cv_select_lambda(data.view(), 5, &grid, derive_seed(207, seed), CenterMode::TrainMean)
                .unwrap();
        let lambda_max = *grid.last().unwrap();
        if result.chosen() <= lambda_max * 1e-3 {
            low_decade += 1;
        }
    }
    assert!(
        low_decade * 10 >= trials * 8,
        "only {low_decade}/{trials} runs stayed in the lowest decade"
    );
}

fn labeled_blobs(
    seed: u64,
    per_class: usize,
    separation: f64,
    p: usize,
) -> (Array2<f64>, Vec<usize>) {
    let mut rng = substream(seed, 0);
    let c = 2;
    let mut features = Array2::zeros((c * per_class, p));
    let mut labels = Vec::with_capacity(c * per_class);
    for class in 0..c {
        for i in 0..per_class {
            let row = class * per_class + i;
            for j in 0..p {
                let center = if j == 0 { separation * class as f64 } else { 0.0 };
                features[[row, j]] = center + rng.random_range(-1.0..1.0);
            }
            labels.push(class);
        }
    }
    (features, labels)
}

#[test]
fn supervised_cv_reaches_zero_error_on_separable_classes() {
    let (features, labels) = labeled_blobs(209, 12, 30.0, 3);
    let grids = vec![vec![0.1, 1.0, 10.0]; 2];
    let result = cv_select_supervised(
        features.view(),
        &labels,
        2,
        4,
        &grids,
        3,
        |t, l, params| fit_qda(t, l, params),
    )
    .unwrap();
    assert_eq!(result.cv_error, 0.0);
}

#[test]
fn supervised_cv_error_matches_majority_baseline_on_noise() {
    // Labels independent of features: no classifier beats the majority
    // class, so the CV error sits near 1 - max prior.
    let mut rng = substream(211, 0);
    let n = 240;
    let p = 4;
    let mut features = Array2::zeros((n, p));
    for v in features.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let labels: Vec<usize> = (0..n)
        .map(|_| if rng.random::<f64>() < 0.6 { 0 } else { 1 })
        .collect();
    let max_prior = labels.iter().filter(|&&l| l == 0).count() as f64 / n as f64;
    let max_prior = max_prior.max(1.0 - max_prior);
    let grids = vec![vec![0.5, 2.0, 8.0]; 2];
    let result = cv_select_supervised(
        features.view(),
        &labels,
        2,
        5,
        &grids,
        7,
        |t, l, params| fit_qda(t, l, params),
    )
    .unwrap();
    assert!(
        (result.cv_error - (1.0 - max_prior)).abs() < 0.1,
        "cv error {} vs baseline {}",
        result.cv_error,
        1.0 - max_prior
    );
}

#[test]
fn supervised_cv_rejects_single_class() {
    let (features, _) = labeled_blobs(213, 10, 5.0, 3);
    let labels = vec![0usize; features.nrows()];
    let grids = vec![vec![0.5, 2.0]];
    let err = cv_select_supervised(
        features.view(),
        &labels,
        1,
        4,
        &grids,
        1,
        |t, l, params| fit_qda(t, l, params),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Stratification(_)));
}

#[test]
fn qda_with_cv_penalties_fits_well_separated_training_data() {
    // Three spherical classes separated by ~6 sigma, with fewer samples per
    // class than dimensions, so regularization is mandatory.
    let p = 10;
    let per_class = 8;
    let mut rng = substream(217, 0);
    let mut features = Array2::zeros((3 * per_class, p));
    let mut labels = Vec::new();
    let centers = [0.0, 6.0, 12.0];
    for class in 0..3 {
        for i in 0..per_class {
            let row = class * per_class + i;
            for j in 0..p {
                let center = if j == 0 { centers[class] } else { 0.0 };
                features[[row, j]] = center + rng.random_range(-1.0..1.0);
            }
            labels.push(class);
        }
    }
    let grids = qda_lambda_grids(features.view(), &labels, 3, 4, 5, 1e-2, 10).unwrap();
    for grid in &grids {
        assert!(
            grid.iter().all(|&l| l > 0.0),
            "zero penalty must be pruned when classes are data-poor"
        );
    }
    let chosen = cv_select_supervised(
        features.view(),
        &labels,
        3,
        4,
        &grids,
        5,
        |t, l, params| fit_qda(t, l, params),
    )
    .unwrap();
    let model = fit_qda(features.view(), &labels, &chosen.params).unwrap();
    let correct = features
        .outer_iter()
        .zip(&labels)
        .filter(|(row, &label)| model.predict(*row) == label)
        .count();
    assert_eq!(correct, features.nrows(), "training accuracy below 1.0");
}

#[test]
fn rda_prefers_pooled_covariance_when_classes_share_one() {
    // Equal population covariances: the pooled fit is the right model, so
    // cross-validation should land near gamma = 0 in most seeded trials.
    let trials = 7;
    let mut near_zero = 0;
    for seed in 0..trials {
        let mut rng = substream(219, seed);
        let p = 4;
        let per_class = 20;
        let mut features = Array2::zeros((2 * per_class, p));
        let mut labels = Vec::new();
        for class in 0..2 {
            for i in 0..per_class {
                let row = class * per_class + i;
                for j in 0..p {
                    let center = if j == 0 { 4.0 * class as f64 } else { 0.0 };
                    features[[row, j]] = center + rng.random_range(-1.5..1.5);
                }
                labels.push(class);
            }
        }
        let grid = vec![vec![0.0, 0.25, 0.5, 0.75, 1.0]];
        let result = cv_select_supervised(
            features.view(),
            &labels,
            2,
            5,
            &grid,
            derive_seed(219, seed),
            |t, l, params| fit_rda(t, l, 2, params[0]),
        )
        .unwrap();
        if result.params[0] <= 0.25 {
            near_zero += 1;
        }
    }
    assert!(
        near_zero * 2 > trials,
        "gamma near 0 in only {near_zero}/{trials} trials"
    );
}

#[test]
fn dispersion_concentrates_when_samples_dominate() {
    // n >> p: every eigenvalue within 1 +- 3 sqrt(p/n) in at least 95% of
    // trials.
    let spec = DispersionSpec {
        p: 4,
        n_list: vec![2000],
        trials: 40,
        seed: 223,
    };
    let rows = dispersion_experiment(&spec).unwrap();
    let band = 3.0 * (4.0f64 / 2000.0).sqrt();
    let inside = rows
        .iter()
        .filter(|row| {
            row.eigenvalues
                .iter()
                .all(|&e| e >= 1.0 - band && e <= 1.0 + band)
        })
        .count();
    assert!(
        inside * 100 >= rows.len() * 95,
        "only {inside}/{} trials fully inside the band",
        rows.len()
    );
}
