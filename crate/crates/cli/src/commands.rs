use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use endogarble::harness::{
    check_logistic_figure, check_rows, default_gamma_grid, run_convergence, run_logistic_figure,
    run_recovery_attack_with, run_small_sample, run_small_sample_ladder, run_tradeoff_sweep, write_rows_csv,
    write_rows_json, RecoveryReport, RecoveryScenario, SmallSampleReport, ToleranceViolation,
};
use endogarble::{
    choose_gamma_signs, tradeoff_point, CovariateSpec, ExperimentConfig, ExperimentRow, GarblingConfig, Matrix,
    NoiseMode, RegressionModel, TradeoffPoint,
};
use endogarble_service::{serve, steal, ServiceClient, ServiceConfig, StealReport, StealRequest};

use crate::args::{CovariateArgs, Experiment, Format, ModelArgs, ServeArgs, SimulateArgs, StealArgs, TradeoffArgs};

/// Opens `--out`, or standard output.
pub fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn covariate_spec(args: &CovariateArgs, k: usize) -> Result<CovariateSpec> {
    let vars = match args.var_x.len() {
        1 => vec![args.var_x[0]; k],
        len if len == k => args.var_x.clone(),
        len => bail!("--var-x has {len} values but the model has {k} regressors"),
    };
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { vars[i] } else { args.cov }).collect())
        .collect();
    let cov = Matrix::from_rows(&rows).expect("square by construction");
    Ok(CovariateSpec::centered(cov, 1)?)
}

fn model(args: &ModelArgs) -> Result<RegressionModel> {
    Ok(RegressionModel::new(args.alpha, args.beta.clone(), args.link.into())?)
}

#[derive(Debug, Serialize)]
struct TradeoffRecord {
    gamma: f64,
    lambda: f64,
    d_closed: f64,
    d_relative: f64,
    sigma2_closed: f64,
}

/// Closed-form table: one row per γ, errors of the first regressor.
pub fn tradeoff(args: &TradeoffArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    let model = model(&args.model)?;
    let k = model.k();
    let spec = covariate_spec(&args.covariates, k)?;
    let mode: NoiseMode = args.noise_mode.into();
    let grid = args.gamma.clone().unwrap_or_else(default_gamma_grid);

    let mut points: Vec<TradeoffPoint> = Vec::with_capacity(grid.len());
    for &g in &grid {
        let garbling = if args.choose_signs {
            choose_gamma_signs(&model, &vec![g.abs(); k], &spec, args.lambda, mode)?
        } else {
            GarblingConfig::new(vec![g; k], args.lambda)?.with_noise_mode(mode)
        };
        points.push(tradeoff_point(&model, &garbling, &spec)?);
    }

    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &points)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for p in &points {
                w.serialize(TradeoffRecord {
                    gamma: p.gamma[0],
                    lambda: p.lambda,
                    d_closed: p.estimation_error[0],
                    d_relative: p.estimation_error_relative[0],
                    sigma2_closed: p.prediction_error_sq,
                })?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn single_gamma(args: &SimulateArgs) -> Result<f64> {
    match args.gamma.as_deref() {
        Some([g]) => Ok(*g),
        Some(_) => bail!("this experiment takes a single --gamma"),
        None => bail!("--gamma is required for this experiment"),
    }
}

fn experiment_config(args: &SimulateArgs, seed: u64) -> Result<ExperimentConfig> {
    let model = model(&args.model)?;
    let k = model.k();
    let spec = covariate_spec(&args.covariates, k)?;
    let sweep = matches!(args.experiment, Experiment::Sweep | Experiment::LogisticFigure);
    let gamma = if sweep { 0.0 } else { single_gamma(args)? };
    let garbling = GarblingConfig::new(vec![gamma; k], args.lambda)?
        .with_output_lambda(args.output_lambda)
        .with_noise_mode(args.noise_mode.into());
    let mut config = ExperimentConfig::new(model, garbling, spec, args.n, seed)?
        .with_replicates(args.replicates)
        .with_execution(args.execution.into());
    if sweep {
        config = config.with_grid(args.gamma.clone().unwrap_or_else(default_gamma_grid));
    }
    Ok(config)
}

fn write_rows(rows: &[ExperimentRow], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Csv => write_rows_csv(rows, &mut *out)?,
        Format::Json => {
            write_rows_json(rows, &mut *out)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn write_records<T: Serialize>(records: &[T], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AttackerRecord<'a> {
    label: &'a str,
    beta: f64,
    gamma: f64,
    lambda: f64,
    n: usize,
    seed: u64,
    assumed_lambda: f64,
    assumed_output_lambda: f64,
    service_output_lambda: f64,
    beta_hat: f64,
    residual_variance: f64,
    recovered_beta: f64,
    expected_limit: f64,
    relative_error: f64,
    candidate_minus: f64,
    candidate_plus: f64,
}

fn attacker_records(report: &RecoveryReport) -> Vec<AttackerRecord<'_>> {
    report
        .attackers
        .iter()
        .map(|a| AttackerRecord {
            label: &a.label,
            beta: report.beta,
            gamma: report.gamma,
            lambda: report.lambda,
            n: report.n,
            seed: report.seed,
            assumed_lambda: a.assumed_lambda,
            assumed_output_lambda: a.assumed_output_lambda,
            service_output_lambda: a.service_output_lambda,
            beta_hat: a.beta_hat,
            residual_variance: a.residual_variance,
            recovered_beta: a.recovered_beta,
            expected_limit: a.expected_limit,
            relative_error: a.relative_error,
            candidate_minus: a.candidates.0,
            candidate_plus: a.candidates.1,
        })
        .collect()
}

fn small_sample_violation(config: &ExperimentConfig, reports: &[SmallSampleReport]) -> Option<ToleranceViolation> {
    let tol = config.tolerances.small_sample;
    reports
        .iter()
        .find(|r| r.relative_error > tol)
        .map(|r| ToleranceViolation {
            quantity: format!("small_sample_mse (n={})", r.n),
            gamma: config.garbling.gammas[0],
            observed: r.mse_empirical,
            expected: r.mse_analytic.unwrap_or(r.mse_monte_carlo_moment),
            tolerance: tol,
        })
}

fn recovery_violation(config: &ExperimentConfig, report: &RecoveryReport) -> Option<ToleranceViolation> {
    let tol = config.tolerances.estimation;
    ["known_lambda", "output_noise_both"]
        .iter()
        .filter_map(|label| report.attacker(label))
        .find(|a| a.relative_error > tol)
        .map(|a| ToleranceViolation {
            quantity: format!("recovered_beta ({})", a.label),
            gamma: report.gamma,
            observed: a.recovered_beta,
            expected: report.beta,
            tolerance: tol,
        })
}

/// Runs the chosen experiment and writes its table. Returns the first
/// violated tolerance unless checks are disabled.
pub fn simulate(
    args: &SimulateArgs,
    seed: u64,
    format: Format,
    out: &mut dyn Write,
) -> Result<Option<ToleranceViolation>> {
    let config = experiment_config(args, seed)?;
    let violation = match args.experiment {
        Experiment::Convergence => {
            let rows = run_convergence(&config)?;
            write_rows(&rows, format, out)?;
            check_rows(&config, &rows[rows.len() - 1..])
        }
        Experiment::Sweep => {
            let rows = run_tradeoff_sweep(&config)?;
            write_rows(&rows, format, out)?;
            check_rows(&config, &rows)
        }
        Experiment::LogisticFigure => {
            let rows = run_logistic_figure(&config)?;
            write_rows(&rows, format, out)?;
            check_logistic_figure(&rows)
        }
        Experiment::SmallSample => {
            let reports = match &args.n_ladder {
                Some(ns) => run_small_sample_ladder(&config, ns)?,
                None => vec![run_small_sample(&config)?],
            };
            write_records(&reports, format, out)?;
            small_sample_violation(&config, &reports)
        }
        Experiment::Recovery => {
            let scenario = RecoveryScenario {
                misspecified_factor: args.misspecified_factor,
                output_lambda: args.recovery_output_lambda,
            };
            let report = run_recovery_attack_with(&config, &scenario)?;
            match format {
                Format::Csv => write_records(&attacker_records(&report), format, out)?,
                Format::Json => {
                    serde_json::to_writer_pretty(&mut *out, &report)?;
                    writeln!(out)?;
                }
            }
            recovery_violation(&config, &report)
        }
    };
    out.flush()?;
    Ok(if args.no_check { None } else { violation })
}

/// Starts the service and blocks until it exits.
pub fn serve_command(args: &ServeArgs, seed: Option<u64>) -> Result<()> {
    let mut config = ServiceConfig::from_file(&args.config)?;
    if let Some(bind) = &args.bind {
        config.bind_address = bind.clone();
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let handle = serve(&config)?;
    eprintln!("listening on {}", handle.url());
    handle.wait()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct StealRecord<'a> {
    k: usize,
    link: &'a str,
    n: usize,
    requests: usize,
    intercept_hat: f64,
    slopes_hat: String,
    residual_variance: f64,
    recovered_beta: Option<f64>,
    candidate_minus: Option<f64>,
    candidate_plus: Option<f64>,
}

pub fn steal_command(args: &StealArgs, seed: u64, format: Format, out: &mut dyn Write) -> Result<StealReport> {
    let info = ServiceClient::new(&args.endpoint)?.info()?;
    let request = StealRequest {
        endpoint: args.endpoint.clone(),
        spec: covariate_spec(&args.covariates, info.k)?,
        n: args.n,
        estimator: args.estimator.into(),
        known_lambda: args.known_lambda,
        known_output_lambda: args.known_output_lambda,
        seed,
        batch: args.batch,
    };
    let report = steal(&request)?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let slopes: Vec<String> = report.fit.slopes_hat.iter().map(|b| b.to_string()).collect();
            let record = StealRecord {
                k: report.k,
                link: &report.link,
                n: report.n,
                requests: report.requests,
                intercept_hat: report.fit.intercept_hat,
                slopes_hat: slopes.join(";"),
                residual_variance: report.fit.residual_variance,
                recovered_beta: report.recovered_beta,
                candidate_minus: report.candidates.map(|c| c.0),
                candidate_plus: report.candidates.map(|c| c.1),
            };
            write_records(&[record], format, out)?;
        }
    }
    out.flush()?;
    Ok(report)
}
