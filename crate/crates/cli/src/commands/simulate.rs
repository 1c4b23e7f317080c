//! `simulate-dispersion`, `simulate-paths`, and `simulate-loss` subcommands.
//! All three emit the long-format CSV `scenario,trial,method,metric,value`.

use serde_json::json;

use cernn_core::losses::{
    bimodal_experiment, dispersion_experiment, path_at_condition_number, BimodalSpec,
    DispersionSpec, ExperimentMethod, HighFraction,
};
use cernn_core::spectral::{eig_sym, sample_covariance};

use crate::io::{read_observations, write_long_csv, write_sidecar, LongRow};
use crate::{CliError, DispersionArgs, LossArgs, PathsArgs};

fn eig_metric(rank: usize, p: usize) -> String {
    let digits = p.to_string().len();
    format!("eig{:0width$}", rank + 1, width = digits)
}

pub fn run_dispersion(args: DispersionArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed);
    let spec = DispersionSpec {
        p: args.p,
        n_list: args.n_list.clone(),
        trials: args.trials,
        seed,
    };
    let rows = dispersion_experiment(&spec)?;
    let mut out = Vec::with_capacity(rows.len() * args.p);
    for row in &rows {
        for (rank, &value) in row.eigenvalues.iter().enumerate() {
            out.push(LongRow {
                scenario: format!("n={}", row.n),
                trial: row.trial,
                method: "sample".to_string(),
                metric: eig_metric(rank, args.p),
                value,
            });
        }
    }
    write_long_csv(&args.output, &out)?;
    let config = json!({
        "command": "simulate-dispersion",
        "output": args.output.display().to_string(),
        "p": args.p,
        "n_list": args.n_list,
        "trials": args.trials,
        "seed": seed,
    });
    write_sidecar(&args.output, &config)
}

pub fn run_paths(args: PathsArgs) -> Result<(), CliError> {
    if args.kappas.is_empty() {
        return Err(CliError::Usage("--kappas must list at least one target".into()));
    }
    let (d, source) = match (&args.eigenvalues, &args.input) {
        (Some(values), None) => (values.clone(), json!("flag")),
        (None, Some(path)) => {
            let data = read_observations(path)?;
            let s = sample_covariance(data.view())?;
            let spectrum = eig_sym(&s)?;
            (
                spectrum.eigenvalues().to_vec(),
                json!(path.display().to_string()),
            )
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --eigenvalues or --input".into(),
            ));
        }
    };
    let points = path_at_condition_number(&d, &args.kappas)?;
    let p = d.len();
    let mut out = Vec::new();
    for point in &points {
        let scenario = format!("kappa={}", point.kappa);
        out.push(LongRow {
            scenario: scenario.clone(),
            trial: 0,
            method: point.method.name().to_string(),
            metric: "parameter".to_string(),
            value: point.parameter,
        });
        for (rank, &value) in point.eigenvalues.iter().enumerate() {
            out.push(LongRow {
                scenario: scenario.clone(),
                trial: 0,
                method: point.method.name().to_string(),
                metric: eig_metric(rank, p),
                value,
            });
        }
    }
    write_long_csv(&args.output, &out)?;
    let config = json!({
        "command": "simulate-paths",
        "output": args.output.display().to_string(),
        "eigenvalues": d,
        "eigenvalue_source": source,
        "kappas": args.kappas,
    });
    write_sidecar(&args.output, &config)
}

fn parse_scenario(raw: &str) -> Result<HighFraction, CliError> {
    if raw == "singleton" {
        return Ok(HighFraction::Singleton);
    }
    let trimmed = raw.strip_prefix("high").unwrap_or(raw);
    let fraction: f64 = trimmed.parse().map_err(|_| {
        CliError::Usage(format!(
            "--scenario must be `singleton` or a fraction in [0, 0.4], got {raw}"
        ))
    })?;
    // Accept either a fraction (0.4) or a percentage tag (high40).
    let fraction = if raw.starts_with("high") && fraction >= 1.0 {
        fraction / 100.0
    } else {
        fraction
    };
    Ok(HighFraction::Fraction(fraction))
}

pub fn run_loss(args: LossArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed);
    let trials = if args.full_scale { 100 } else { args.trials };
    let mut spec = BimodalSpec::new(args.p, parse_scenario(&args.scenario)?, args.ratio, trials, seed);
    spec.upsilon = args.upsilon;

    let mut methods = Vec::new();
    for name in &args.methods {
        match name.as_str() {
            "cernn" => methods.push(ExperimentMethod::Cernn),
            "cnr" => methods.push(ExperimentMethod::Cnr),
            "lw" => methods.push(ExperimentMethod::Lw),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown method `{other}` (expected cernn, cnr, or lw)"
                )));
            }
        }
    }
    if methods.is_empty() {
        return Err(CliError::Usage("--methods must list at least one method".into()));
    }

    let table = bimodal_experiment(&spec, &methods, args.folds)?;

    let mut out = Vec::new();
    let mut cernn_by_trial = std::collections::HashMap::new();
    for record in &table.records {
        if record.method == ExperimentMethod::Cernn {
            cernn_by_trial.insert(record.trial, record.losses);
        }
    }
    for record in &table.records {
        let scenario = table.scenario.clone();
        let method = record.method.name().to_string();
        out.push(LongRow {
            scenario: scenario.clone(),
            trial: record.trial,
            method: method.clone(),
            metric: "entropy".to_string(),
            value: record.losses.entropy,
        });
        out.push(LongRow {
            scenario: scenario.clone(),
            trial: record.trial,
            method: method.clone(),
            metric: "quadratic".to_string(),
            value: record.losses.quadratic,
        });
        if let Some(base) = cernn_by_trial.get(&record.trial) {
            out.push(LongRow {
                scenario: scenario.clone(),
                trial: record.trial,
                method: method.clone(),
                metric: "entropy_ratio".to_string(),
                value: record.losses.entropy / base.entropy,
            });
            out.push(LongRow {
                scenario,
                trial: record.trial,
                method,
                metric: "quadratic_ratio".to_string(),
                value: record.losses.quadratic / base.quadratic,
            });
        }
    }
    write_long_csv(&args.output, &out)?;

    println!("scenario {}: mean loss ratios vs cernn over {trials} trials", table.scenario);
    for row in &table.summary {
        println!(
            "  {:>6}  quadratic {:.3} ({:.3})  entropy {:.3} ({:.3})",
            row.method.name(),
            row.quadratic_mean,
            row.quadratic_sd,
            row.entropy_mean,
            row.entropy_sd
        );
    }

    let config = json!({
        "command": "simulate-loss",
        "output": args.output.display().to_string(),
        "p": args.p,
        "scenario": args.scenario,
        "ratio": args.ratio,
        "upsilon": args.upsilon,
        "trials": trials,
        "full_scale": args.full_scale,
        "methods": args.methods,
        "folds": args.folds,
        "seed": seed,
        "derived_n": spec.sample_size(),
    });
    write_sidecar(&args.output, &config)
}
