//! `cluster` and `classify` subcommands.

use ndarray::ArrayView2;
use serde_json::json;

use cernn_core::applications::{
    em_cluster, fit_qda, fit_rda, qda_lambda_grids, EmConfig, QdaModel,
};
use cernn_core::selection::cv_select_supervised;

use crate::io::{model_json, read_labels, read_observations, write_sidecar, write_text};
use crate::{ClassifyArgs, ClassifyMethod, CliError, ClusterArgs};

pub fn run_cluster(args: ClusterArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed);
    if args.clusters == 0 {
        return Err(CliError::Usage("--clusters must be at least 1".into()));
    }
    if args.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    let data = read_observations(&args.input)?;
    let config = EmConfig {
        n_clusters: args.clusters,
        lambda: args.lambda,
        restarts: args.restarts,
        max_iter: args.max_iter,
        tol: args.tol,
        seed,
        freeze_alpha_after: None,
    };
    let fit = em_cluster(data.view(), &config)?;

    write_text(&args.output, &model_json(&fit.state.classes, seed))?;
    if let Some(path) = &args.assignments {
        let mut out = String::new();
        for id in fit.responsibilities.hard_assignments() {
            out.push_str(&format!("{id}\n"));
        }
        write_text(path, &out)?;
    }
    println!(
        "best restart {} of {}: objective {:.6}, expected loglik {:.6}, {} iterations",
        fit.selected_restart + 1,
        args.restarts,
        fit.state.objective,
        fit.expected_loglik,
        fit.state.iteration
    );

    let sidecar = json!({
        "command": "cluster",
        "input": args.input.display().to_string(),
        "output": args.output.display().to_string(),
        "assignments": args.assignments.as_ref().map(|p| p.display().to_string()),
        "clusters": args.clusters,
        "lambda": args.lambda,
        "restarts": args.restarts,
        "max_iter": args.max_iter,
        "tol": args.tol,
        "seed": seed,
        "selected_restart": fit.selected_restart,
        "objective": fit.state.objective,
    });
    write_sidecar(&args.output, &sidecar)
}

fn count_classes(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1)
}

fn fit_classifier(
    args: &ClassifyArgs,
    train: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<(QdaModel, serde_json::Value), CliError> {
    match args.method {
        ClassifyMethod::Cernn => {
            let lambdas: Vec<f64> = if args.lambda == "auto" {
                let grids = qda_lambda_grids(
                    train,
                    labels,
                    n_classes,
                    args.folds,
                    seed,
                    args.epsilon,
                    args.grid_size,
                )?;
                cv_select_supervised(train, labels, n_classes, args.folds, &grids, seed, |t, l, params| {
                    fit_qda(t, l, params)
                })?
                .params
            } else {
                let value: f64 = args.lambda.parse().map_err(|_| {
                    CliError::Usage(format!(
                        "--lambda must be a number or `auto`, got {}",
                        args.lambda
                    ))
                })?;
                vec![value; n_classes]
            };
            let model = fit_qda(train, labels, &lambdas)?;
            Ok((model, json!({ "method": "cernn", "lambdas": lambdas })))
        }
        ClassifyMethod::Rda => {
            let gamma = if args.gamma == "auto" {
                // Candidate mixing weights, keeping only those that produce a
                // positive-definite fit on the full training set.
                let raw: Vec<f64> = (0..args.grid_size)
                    .map(|i| i as f64 / (args.grid_size - 1) as f64)
                    .collect();
                let feasible: Vec<f64> = raw
                    .into_iter()
                    .filter(|&g| fit_rda(train, labels, n_classes, g).is_ok())
                    .collect();
                if feasible.is_empty() {
                    return Err(CliError::Numeric(
                        "no mixing weight produces a positive-definite fit; supply more data".into(),
                    ));
                }
                let chosen = cv_select_supervised(
                    train,
                    labels,
                    n_classes,
                    args.folds,
                    &[feasible],
                    seed,
                    |t, l, params| fit_rda(t, l, n_classes, params[0]),
                )?;
                chosen.params[0]
            } else {
                args.gamma.parse().map_err(|_| {
                    CliError::Usage(format!(
                        "--gamma must be a number or `auto`, got {}",
                        args.gamma
                    ))
                })?
            };
            let model = fit_rda(train, labels, n_classes, gamma)?;
            Ok((model, json!({ "method": "rda", "gamma": gamma })))
        }
    }
}

pub fn run_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed);
    if args.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    if args.grid_size < 2 {
        return Err(CliError::Usage("--grid-size must be at least 2".into()));
    }
    let train = read_observations(&args.train)?;
    let labels = read_labels(&args.train_labels)?;
    if labels.len() != train.nrows() {
        return Err(CliError::Data(format!(
            "{} labels but {} training rows",
            labels.len(),
            train.nrows()
        )));
    }
    let n_classes = count_classes(&labels);
    if n_classes < 2 {
        return Err(CliError::Data(
            "training labels must contain at least two classes".into(),
        ));
    }
    let test = read_observations(&args.test)?;
    if test.ncols() != train.ncols() {
        return Err(CliError::Data(format!(
            "test rows have {} columns but training rows have {}",
            test.ncols(),
            train.ncols()
        )));
    }

    let (model, fit_params) = fit_classifier(&args, train.view(), &labels, n_classes, seed)?;

    let mut out = String::new();
    for row in test.outer_iter() {
        out.push_str(&format!("{}\n", model.predict(row)));
    }
    write_text(&args.output, &out)?;
    if let Some(path) = &args.model_out {
        write_text(path, &model_json(model.classes(), seed))?;
    }

    let sidecar = json!({
        "command": "classify",
        "train": args.train.display().to_string(),
        "train_labels": args.train_labels.display().to_string(),
        "test": args.test.display().to_string(),
        "output": args.output.display().to_string(),
        "model_out": args.model_out.as_ref().map(|p| p.display().to_string()),
        "fit": fit_params,
        "folds": args.folds,
        "grid_size": args.grid_size,
        "epsilon": args.epsilon,
        "seed": seed,
        "n_classes": n_classes,
    });
    write_sidecar(&args.output, &sidecar)
}
