//! `estimate` and `cv` subcommands.

use serde_json::json;

use cernn_core::selection::{cv_select_cnr, cv_select_lambda, lambda_grid};
use cernn_core::shrinkage::{
    alpha_hat, cernn_estimate, cnr_estimate, linear_shrinkage, lw_estimate, CernnParams,
};
use cernn_core::spectral::{eig_sym, sample_covariance};

use crate::io::{fmt_float, read_observations, write_matrix_csv, write_sidecar, write_text};
use crate::{CliError, CvArgs, EstimateArgs, MethodArg};

/// Parses a flag that accepts either a number or the literal `auto`.
fn parse_auto(flag: &str, value: &str) -> Result<Option<f64>, CliError> {
    if value == "auto" {
        return Ok(None);
    }
    value
        .parse()
        .map(Some)
        .map_err(|_| CliError::Usage(format!("--{flag} must be a number or `auto`, got {value}")))
}

pub fn run(args: EstimateArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed);
    if args.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    if args.grid_size < 2 {
        return Err(CliError::Usage("--grid-size must be at least 2".into()));
    }
    let data = read_observations(&args.input)?;
    let n = data.nrows();
    let s = sample_covariance(data.view())?;

    let mut config = json!({
        "command": "estimate",
        "input": args.input.display().to_string(),
        "output": args.output.display().to_string(),
        "seed": seed,
        "n": n,
        "p": data.ncols(),
        "center_mode": args.center_mode.name(),
    });

    let matrix = match args.method {
        MethodArg::Sample => {
            config["method"] = json!("sample");
            s.as_array().clone()
        }
        MethodArg::Cernn => {
            let alpha = match args.alpha {
                Some(a) => a,
                None => alpha_hat(&s)?,
            };
            let lambda_flag = args.lambda.as_deref().unwrap_or("auto");
            let lambda = match parse_auto("lambda", lambda_flag)? {
                Some(v) => v,
                None => {
                    let spectrum = eig_sym(&s)?;
                    let d: Vec<f64> = spectrum.eigenvalues().to_vec();
                    let grid = lambda_grid(&d, n as f64, alpha, args.epsilon, args.grid_size)?;
                    if grid.len() == 1 {
                        eprintln!(
                            "warning: penalty grid degenerated to {{0}} (spectrum already at the prior mode)"
                        );
                        0.0
                    } else {
                        let result = cv_select_lambda(
                            data.view(),
                            args.folds,
                            &grid,
                            seed,
                            args.center_mode.mode(),
                        )?;
                        config["cv_grid"] = json!(result.grid());
                        config["cv_mean_scores"] = json!(result.mean_scores());
                        result.chosen()
                    }
                }
            };
            let params = CernnParams::new(n as f64, lambda, alpha)?;
            let est = cernn_estimate(&s, &params)?;
            config["method"] = json!("cernn");
            config["lambda"] = json!(lambda);
            config["alpha"] = json!(alpha);
            config["folds"] = json!(args.folds);
            est.matrix().as_array().clone()
        }
        MethodArg::Linear => {
            let gamma = args
                .gamma
                .ok_or_else(|| CliError::Usage("--gamma is required for --method linear".into()))?;
            let rho = match args.rho {
                Some(r) => r,
                None => s.trace() / s.dim() as f64,
            };
            let est = linear_shrinkage(&s, gamma, rho)?;
            config["method"] = json!("linear");
            config["gamma"] = json!(gamma);
            config["rho"] = json!(rho);
            est.matrix().as_array().clone()
        }
        MethodArg::Lw => {
            let est = lw_estimate(data.view())?;
            if let cernn_core::MethodParams::Lw { weight } = est.params() {
                config["weight"] = json!(weight);
            }
            config["method"] = json!("lw");
            est.matrix().as_array().clone()
        }
        MethodArg::Cnr => {
            let kappa_flag = args.kappa_max.as_deref().ok_or_else(|| {
                CliError::Usage("--kappa-max is required for --method cnr".into())
            })?;
            let spectrum = eig_sym(&s)?;
            let d = spectrum.eigenvalues();
            let bottom = d[d.len() - 1];
            if bottom <= 0.0 {
                return Err(CliError::Numeric(
                    "sample covariance is singular; cnr needs strictly positive eigenvalues"
                        .into(),
                ));
            }
            let kappa = match parse_auto("kappa-max", kappa_flag)? {
                Some(v) => v,
                None => {
                    let cond = d[0] / bottom;
                    let grid = kappa_grid(cond, args.grid_size);
                    let result = cv_select_cnr(
                        data.view(),
                        args.folds,
                        &grid,
                        seed,
                        args.center_mode.mode(),
                    )?;
                    config["cv_grid"] = json!(result.grid());
                    config["cv_mean_scores"] = json!(result.mean_scores());
                    result.chosen()
                }
            };
            let est = cnr_estimate(&s, kappa)?;
            if let cernn_core::MethodParams::Cnr { tau_star, .. } = est.params() {
                config["tau_star"] = json!(tau_star);
            }
            config["method"] = json!("cnr");
            config["kappa_max"] = json!(kappa);
            est.matrix().as_array().clone()
        }
    };

    write_matrix_csv(&args.output, &matrix)?;
    write_sidecar(&args.output, &config)
}

/// Log-spaced condition-number caps from 1 up to the sample condition number.
fn kappa_grid(cond: f64, size: usize) -> Vec<f64> {
    if !(cond > 1.0) {
        return vec![1.0];
    }
    let top = cond.ln();
    (0..size)
        .map(|i| (top * i as f64 / (size - 1) as f64).exp())
        .collect()
}

pub fn run_cv(args: CvArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed);
    if args.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    if args.grid_size < 2 {
        return Err(CliError::Usage("--grid-size must be at least 2".into()));
    }
    let data = read_observations(&args.input)?;
    let n = data.nrows();
    let s = sample_covariance(data.view())?;
    let alpha = alpha_hat(&s)?;
    let spectrum = eig_sym(&s)?;
    let d: Vec<f64> = spectrum.eigenvalues().to_vec();
    let grid = lambda_grid(&d, n as f64, alpha, args.epsilon, args.grid_size)?;
    if grid.len() == 1 {
        eprintln!("warning: penalty grid degenerated to {{0}}");
    }
    let result = cv_select_lambda(data.view(), args.folds, &grid, seed, args.center_mode.mode())?;

    let mut out = String::from("lambda,mean_score\n");
    for (&l, &score) in result.grid().iter().zip(result.mean_scores()) {
        out.push_str(&format!("{},{}\n", fmt_float(l), fmt_float(score)));
    }
    write_text(&args.output, &out)?;
    println!("chosen lambda: {}", fmt_float(result.chosen()));

    let config = json!({
        "command": "cv",
        "input": args.input.display().to_string(),
        "output": args.output.display().to_string(),
        "folds": args.folds,
        "grid_size": args.grid_size,
        "epsilon": args.epsilon,
        "seed": seed,
        "center_mode": args.center_mode.name(),
        "alpha": alpha,
        "chosen_lambda": result.chosen(),
    });
    write_sidecar(&args.output, &config)
}
