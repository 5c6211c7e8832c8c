//! Acceptance checks, grouped by criterion.
//!
//! Every check is seeded and its report line carries no timings, so two
//! runs with the same seed print byte-identical reports.

use std::fmt;

use anyhow::{ensure, Context, Result};
use serde::Serialize;

use endogarble::harness::{
    check_logistic_figure, closed_form_r2, default_gamma_grid, quadratic_fit_r2, run_logistic_figure,
    run_recovery_attack_with, run_small_sample, run_tradeoff_sweep, write_rows_csv, RecoveryScenario,
};
use endogarble::{
    choose_gamma_signs, prediction_error_closed, rng, sample_covariates, CovariateSpec, Execution, ExperimentConfig,
    ExperimentRow, GarblingConfig, Matrix, NoiseMode, RegressionModel,
};
use endogarble_service::wire::encode_request;
use endogarble_service::{serve, steal, Estimator, ServiceClient, ServiceConfig, StealRequest};

pub const DEFAULT_SEED: u64 = 42;

/// Upper bound on the probability-scale σ² at γ = 1 in the logistic figure.
/// Reference runs over several seeds landed in [0.0292, 0.0299].
pub const FIGURE_PROBABILITY_SIGMA2_MAX: f64 = 0.035;

/// Upper bound on probability-σ² / log-odds-σ² at γ = 1 in the logistic
/// figure. Reference runs gave about 3.5e-4.
pub const FIGURE_RATIO_MAX: f64 = 5e-4;

/// Minimum relative error the output-noise defense must inflict on an
/// attacker who knows λ but not λ₂.
pub const OUTPUT_NOISE_MIN_ERROR: f64 = 0.05;

const LARGE_N: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub summary: String,
}

impl Check {
    fn new(id: &str, passed: bool, summary: String) -> Self {
        Check {
            id: id.to_string(),
            passed,
            summary,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} {}", self.id, self.summary)
    }
}

fn rel(observed: f64, expected: f64) -> f64 {
    (observed - expected).abs() / expected.abs()
}

fn univariate_linear(beta: f64, gamma: f64, lambda: f64, n: usize, seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::new(
        RegressionModel::linear(0.0, vec![beta])?,
        GarblingConfig::new(vec![gamma], lambda)?,
        CovariateSpec::univariate(1.0, 1)?,
        n,
        seed,
    )?)
}

fn single_row(config: &ExperimentConfig, gamma: f64) -> Result<ExperimentRow> {
    let rows = run_tradeoff_sweep(&config.clone().with_grid(vec![gamma]))?;
    Ok(rows.into_iter().next().expect("one grid point"))
}

/// β = 3, γ = 0.3, λ = 1, x ~ N(0, 1), n = 10⁶: β̂ near 3.9 and the
/// relative estimation error near γ.
pub fn criterion_1(seed: u64) -> Result<Vec<Check>> {
    let (beta, gamma) = (3.0, 0.3);
    let row = single_row(&univariate_linear(beta, gamma, 1.0, LARGE_N, seed)?, gamma)?;
    let beta_hat = beta + row.d_empirical;
    let relative = row.d_empirical / beta;
    Ok(vec![
        Check::new(
            "1a",
            rel(beta_hat, 3.9) <= 0.01,
            format!(
                "beta_hat={beta_hat:.6} within 1% of 3.9 (rel {:.2e})",
                rel(beta_hat, 3.9)
            ),
        ),
        Check::new(
            "1b",
            rel(relative, gamma) <= 0.01,
            format!(
                "relative estimation error={relative:.6} within 1% of gamma=0.3 (rel {:.2e})",
                rel(relative, gamma)
            ),
        ),
    ])
}

/// Same configuration: empirical σ² near (βγ)²(Var(x) + λ²) = 1.62.
pub fn criterion_2(seed: u64) -> Result<Vec<Check>> {
    let row = single_row(&univariate_linear(3.0, 0.3, 1.0, LARGE_N, seed)?, 0.3)?;
    let closed_ok = (row.sigma2_closed - 1.62).abs() < 1e-12;
    Ok(vec![
        Check::new(
            "2a",
            closed_ok,
            format!("sigma2_closed={:.12} equals 1.62", row.sigma2_closed),
        ),
        Check::new(
            "2b",
            rel(row.sigma2_empirical, 1.62) <= 0.02,
            format!(
                "sigma2_empirical={:.6} within 2% of 1.62 (rel {:.2e})",
                row.sigma2_empirical,
                rel(row.sigma2_empirical, 1.62)
            ),
        ),
    ])
}

/// β = 1, γ = 0.5, λ = 1, n = 10, 2·10⁴ replicates, no-intercept fits.
pub fn criterion_3(seed: u64) -> Result<Vec<Check>> {
    let config = univariate_linear(1.0, 0.5, 1.0, 10, seed)?.with_replicates(20_000);
    let report = run_small_sample(&config)?;
    let analytic = report
        .mse_analytic
        .context("standard-normal covariates have an analytic moment")?;
    Ok(vec![
        Check::new(
            "3a",
            (analytic - 0.28125).abs() < 1e-12,
            format!("analytic MSE={analytic:.12} equals 0.28125"),
        ),
        Check::new(
            "3b",
            rel(report.mse_empirical, 0.28125) <= 0.03,
            format!(
                "Monte Carlo MSE={:.6} within 3% of 0.28125 (rel {:.2e})",
                report.mse_empirical,
                rel(report.mse_empirical, 0.28125)
            ),
        ),
    ])
}

/// The four recovery attackers at n = 10⁶ with λ' = 2λ and λ₂ = 0.5.
/// Check 4c is the output-noise defense against an attacker who knows
/// only λ.
pub fn criterion_4(seed: u64) -> Result<Vec<Check>> {
    let (beta, gamma) = (3.0, 0.3);
    let config = univariate_linear(beta, gamma, 1.0, LARGE_N, seed)?;
    let scenario = RecoveryScenario {
        misspecified_factor: 2.0,
        output_lambda: 0.5,
    };
    let report = run_recovery_attack_with(&config, &scenario)?;
    let get = |label: &str| {
        report
            .attacker(label)
            .with_context(|| format!("missing attacker {label}"))
    };
    let known = get("known_lambda")?;
    let mis = get("misspecified_lambda")?;
    let naive = get("output_noise_lambda_only")?;
    let both = get("output_noise_both")?;
    let target_b = beta + beta * gamma / 2.0;
    Ok(vec![
        Check::new(
            "4a",
            known.relative_error < 0.01,
            format!(
                "known-lambda recovery={:.6} within 1% of 3 (rel {:.2e})",
                known.recovered_beta, known.relative_error
            ),
        ),
        Check::new(
            "4b",
            rel(mis.recovered_beta, target_b) <= 0.02,
            format!(
                "lambda'=2*lambda recovery={:.6} within 2% of {target_b} (rel {:.2e})",
                mis.recovered_beta,
                rel(mis.recovered_beta, target_b)
            ),
        ),
        Check::new(
            "4c",
            naive.relative_error >= OUTPUT_NOISE_MIN_ERROR,
            format!(
                "lambda2=0.5 vs lambda-only attacker: recovery={:.6}, error {:.4} >= {OUTPUT_NOISE_MIN_ERROR} (limit {:.6}, limit error {:.4})",
                naive.recovered_beta,
                naive.relative_error,
                naive.expected_limit,
                rel(naive.expected_limit, beta)
            ),
        ),
        Check::new(
            "4d",
            both.relative_error < 0.01,
            format!(
                "(lambda, lambda2)-knowing recovery={:.6} within 1% of 3 (rel {:.2e})",
                both.recovered_beta, both.relative_error
            ),
        ),
    ])
}

fn bivariate_sigma2(cov: f64, mode: NoiseMode, seed: u64) -> Result<ExperimentRow> {
    let config = ExperimentConfig::new(
        RegressionModel::linear(0.0, vec![1.0, 2.0])?,
        GarblingConfig::new(vec![0.5, 0.5], 1.0)?.with_noise_mode(mode),
        CovariateSpec::bivariate(1.0, 1.0, cov, 1)?,
        LARGE_N,
        seed,
    )?;
    single_row(&config, 0.5)
}

/// Worst excess of the sign-chosen σ² over the all-positive σ² across a
/// spread of models, covariances and modes, with the number of cases.
fn sign_choice_excess() -> Result<(f64, usize)> {
    let betas: [&[f64]; 4] = [&[1.0, 2.0], &[1.0, -2.0], &[-3.0, 0.5], &[1.0, 2.0, -1.5]];
    let magnitudes: [&[f64]; 2] = [&[0.5, 0.5, 0.5], &[0.2, 0.9, 0.4]];
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for beta in betas {
        let k = beta.len();
        let model = RegressionModel::linear(0.0, beta.to_vec())?;
        for cov in [-0.45, -0.2, 0.0, 0.2, 0.45] {
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { cov }).collect())
                .collect();
            let spec = CovariateSpec::centered(Matrix::from_rows(&rows).expect("square"), 1)?;
            for mode in [NoiseMode::IndependentPerRegressor, NoiseMode::SharedAcrossRegressors] {
                for mags in magnitudes {
                    let mags = &mags[..k];
                    let positive = GarblingConfig::new(mags.to_vec(), 1.0)?.with_noise_mode(mode);
                    let base = prediction_error_closed(&model, &positive, &spec)?;
                    let chosen = choose_gamma_signs(&model, mags, &spec, 1.0, mode)?;
                    let picked = prediction_error_closed(&model, &chosen, &spec)?;
                    worst = worst.max(picked - base);
                    cases += 1;
                }
            }
        }
    }
    Ok((worst, cases))
}

/// Bivariate β = [1, 2], γ = [0.5, 0.5], λ = 1, unit variances.
pub fn criterion_5(seed: u64) -> Result<Vec<Check>> {
    let independent = bivariate_sigma2(-0.5, NoiseMode::IndependentPerRegressor, seed)?;
    let shared = bivariate_sigma2(-0.5, NoiseMode::SharedAcrossRegressors, seed)?;
    let uncorrelated = bivariate_sigma2(0.0, NoiseMode::IndependentPerRegressor, seed)?;
    let (excess, cases) = sign_choice_excess()?;
    Ok(vec![
        Check::new(
            "5a",
            rel(independent.sigma2_empirical, 2.0) <= 0.02,
            format!(
                "independent mode sigma2_empirical={:.6} within 2% of 2.0 (rel {:.2e})",
                independent.sigma2_empirical,
                rel(independent.sigma2_empirical, 2.0)
            ),
        ),
        Check::new(
            "5b",
            rel(shared.sigma2_empirical, 3.0) <= 0.02,
            format!(
                "shared mode sigma2_empirical={:.6} within 2% of 3.0 (rel {:.2e})",
                shared.sigma2_empirical,
                rel(shared.sigma2_empirical, 3.0)
            ),
        ),
        Check::new(
            "5c",
            independent.sigma2_empirical < uncorrelated.sigma2_empirical,
            format!(
                "sigma2_empirical at cov=-0.5 ({:.6}) < at cov=0 ({:.6})",
                independent.sigma2_empirical, uncorrelated.sigma2_empirical
            ),
        ),
        Check::new(
            "5d",
            excess <= 0.0,
            format!("sign choice never exceeds all-positive sigma2 over {cases} cases (max excess {excess:.3e})"),
        ),
    ])
}

/// Rows of the logistic figure: α = 2, β = 3, λ = 1, Var(x) = 8.3,
/// N = 10⁵, γ from 0 to 1 in steps of 0.05.
pub fn logistic_figure_rows(seed: u64) -> Result<Vec<ExperimentRow>> {
    let config = ExperimentConfig::new(
        RegressionModel::logistic(2.0, vec![3.0])?,
        GarblingConfig::new(vec![0.0], 1.0)?,
        CovariateSpec::univariate(8.3, 1)?,
        100_000,
        seed,
    )?
    .with_grid(default_gamma_grid());
    Ok(run_logistic_figure(&config)?)
}

pub fn criterion_6(seed: u64) -> Result<Vec<Check>> {
    let rows = logistic_figure_rows(seed)?;
    let last = rows.last().context("empty grid")?;
    ensure!(last.gamma == 1.0, "grid must end at gamma = 1");
    let prob = last
        .sigma2_probability_scale
        .context("logistic rows carry a probability column")?;
    let ratio = prob / last.sigma2_empirical;
    let closed_r2 = closed_form_r2(&rows);
    let quad_r2 = quadratic_fit_r2(&rows);
    let trend = check_logistic_figure(&rows);
    Ok(vec![
        Check::new(
            "6a",
            closed_r2 > 0.99 && quad_r2 > 0.99,
            format!("log-odds sigma2 vs (beta*gamma)^2*(Var(x)+lambda^2): R^2={closed_r2:.6}, quadratic-fit R^2={quad_r2:.6}, both > 0.99"),
        ),
        Check::new(
            "6b",
            prob < FIGURE_PROBABILITY_SIGMA2_MAX,
            format!("probability-scale sigma2 at gamma=1 = {prob:.6} < {FIGURE_PROBABILITY_SIGMA2_MAX}"),
        ),
        Check::new(
            "6c",
            ratio < FIGURE_RATIO_MAX,
            format!("probability/log-odds sigma2 ratio at gamma=1 = {ratio:.4e} < {FIGURE_RATIO_MAX:e}"),
        ),
        Check::new(
            "6d",
            trend.is_none(),
            match &trend {
                None => "probability/log-odds ratio decreases along the gamma grid".to_string(),
                Some(v) => format!("ratio trend broken: {v}"),
            },
        ),
    ])
}

/// Leading significant digits of `v`, as they would appear in any decimal
/// rendering of it.
fn digit_needle(v: f64) -> String {
    let s = format!("{:.15e}", v.abs());
    s.chars().filter(char::is_ascii_digit).take(10).collect()
}

/// Sends a fuzzed corpus of good and bad requests to a service whose
/// garbling parameters have distinctive digits, and returns the responses
/// that contain any of them.
fn secrecy_scan(seed: u64) -> Result<(usize, Vec<String>)> {
    let gamma = std::f64::consts::FRAC_1_PI;
    let lambda = 1.234_567_890_123_456_7;
    let output_lambda = std::f64::consts::FRAC_1_SQRT_2;
    let mut config = ServiceConfig::new(
        RegressionModel::linear(0.25, vec![2.0])?,
        GarblingConfig::new(vec![gamma], lambda)?.with_output_lambda(output_lambda),
        "127.0.0.1:0",
        seed,
    );
    config.max_batch = 50;
    let needles: Vec<String> = [gamma, lambda, output_lambda]
        .iter()
        .map(|v| digit_needle(*v))
        .collect();
    let service = serve(&config)?;
    let client = ServiceClient::new(&service.url())?;

    let mut corpus: Vec<String> = [
        "",
        "{}",
        "[]",
        "null",
        "{not json",
        r#"{"inputs": "gamma"}"#,
        r#"{"inputs": [["x"]]}"#,
        r#"{"inputs": [[1, 2, 3]]}"#,
        r#"{"inputs": [[1e400]]}"#,
        r#"{"lambda": 1, "gamma": 1}"#,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    corpus.push(encode_request(&[0.0; 51], 1));
    let mut r = rng::seeded(seed);
    for i in 0..60 {
        let rows = 1 + i % 5;
        let d = sample_covariates(&CovariateSpec::univariate(4.0, rows)?, &mut r)?;
        let mut body = encode_request(d.inputs(), 1);
        if i % 3 == 0 {
            body.truncate(body.len() / 2);
        }
        corpus.push(body);
    }

    let mut responses = Vec::with_capacity(corpus.len() + 2);
    for body in &corpus {
        responses.push(client.raw_predict(body)?);
    }
    responses.push(client.raw_get("/v1/info")?);
    responses.push(client.raw_get("/v1/missing")?);

    let leaks = responses
        .iter()
        .filter_map(|resp| {
            let headers: String = resp.headers.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
            needles
                .iter()
                .find(|n| resp.body.contains(n.as_str()) || headers.contains(n.as_str()))
                .map(|n| format!("status {} leaked {n}", resp.status))
        })
        .collect();
    service.shutdown()?;
    Ok((responses.len(), leaks))
}

/// Criterion 1 over localhost: serve β = 3, γ = 0.3, λ = 1 and steal with
/// n = 10⁵, with and without knowledge of λ; then the secrecy scan.
pub fn criterion_7(seed: u64) -> Result<Vec<Check>> {
    let config = ServiceConfig::new(
        RegressionModel::linear(0.0, vec![3.0])?,
        GarblingConfig::new(vec![0.3], 1.0)?,
        "127.0.0.1:0",
        seed,
    );
    let service = serve(&config)?;
    let request = |known_lambda| StealRequest {
        endpoint: service.url(),
        spec: CovariateSpec::univariate(1.0, 1).expect("valid spec"),
        n: 100_000,
        estimator: Estimator::Ols,
        known_lambda,
        known_output_lambda: None,
        seed: seed.wrapping_add(1),
        batch: config.max_batch,
    };
    let naive = steal(&request(None))?;
    let informed = steal(&request(Some(1.0)))?;
    service.shutdown()?;

    let beta_hat = naive.fit.slopes_hat[0];
    let relative = (beta_hat - 3.0) / 3.0;
    let recovered = informed.recovered_beta.context("recovery runs when lambda is known")?;
    let (probes, leaks) = secrecy_scan(seed)?;
    Ok(vec![
        Check::new(
            "7a",
            rel(beta_hat, 3.9) <= 0.02 && rel(relative, 0.3) <= 0.02,
            format!(
                "over HTTP beta_hat={beta_hat:.6} within 2% of 3.9 (rel {:.2e}), relative error {relative:.6} within 2% of 0.3",
                rel(beta_hat, 3.9)
            ),
        ),
        Check::new(
            "7b",
            rel(recovered, 3.0) <= 0.02,
            format!(
                "over HTTP known-lambda recovery={recovered:.6} within 2% of 3 (rel {:.2e})",
                rel(recovered, 3.0)
            ),
        ),
        Check::new(
            "7c",
            leaks.is_empty(),
            if leaks.is_empty() {
                format!("secrecy scan: {probes} responses, no gamma/lambda/lambda2 digits found")
            } else {
                format!("secrecy scan: {}", leaks.join("; "))
            },
        ),
    ])
}

fn csv_bytes(rows: &[ExperimentRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_rows_csv(rows, &mut buf)?;
    Ok(buf)
}

/// Repeated runs and both execution modes give byte-identical tables.
pub fn criterion_8(seed: u64) -> Result<Vec<Check>> {
    let config = univariate_linear(2.0, 0.0, 1.0, 100_000, seed)?.with_grid(vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let first = csv_bytes(&run_tradeoff_sweep(&config)?)?;
    let second = csv_bytes(&run_tradeoff_sweep(&config)?)?;
    let sequential = csv_bytes(&run_tradeoff_sweep(
        &config.clone().with_execution(Execution::Sequential),
    )?)?;
    let parallel = csv_bytes(&run_tradeoff_sweep(&config.with_execution(Execution::Parallel))?)?;
    let figure_a = csv_bytes(&logistic_figure_rows(seed)?)?;
    let figure_b = csv_bytes(&logistic_figure_rows(seed)?)?;
    Ok(vec![
        Check::new(
            "8a",
            first == second && figure_a == figure_b,
            "repeated sweep and logistic-figure runs produce byte-identical CSV".to_string(),
        ),
        Check::new(
            "8b",
            sequential == parallel,
            "sequential and parallel execution produce byte-identical CSV".to_string(),
        ),
    ])
}

pub type CriterionFn = fn(u64) -> Result<Vec<Check>>;

pub const CRITERIA: [(u8, CriterionFn); 8] = [
    (1, criterion_1),
    (2, criterion_2),
    (3, criterion_3),
    (4, criterion_4),
    (5, criterion_5),
    (6, criterion_6),
    (7, criterion_7),
    (8, criterion_8),
];

/// Every check, in criterion order. A criterion that errors out becomes a
/// single failing check carrying the error.
pub fn run_all(seed: u64) -> Vec<Check> {
    CRITERIA
        .iter()
        .flat_map(|(n, f)| match f(seed) {
            Ok(checks) => checks,
            Err(e) => vec![Check::new(&n.to_string(), false, format!("error: {e:#}"))],
        })
        .collect()
}
