use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{logit_fit, ols_fit, recover_beta_known_lambda_pair, recovery_candidates, FitResult};
use crate::garbler::GarblingConfig;
use crate::model::{CovariateSampler, Dataset, Link};
use crate::rng::{self, lanes};
use crate::tradeoff::{estimation_error_closed, prediction_error_closed, small_sample_mse, MomentMethod};

use super::exec::map_indexed;
use super::simulate::{simulate_queries, SimulatedQueries};
use super::{ExperimentConfig, ExperimentRow};

/// Smallest rung of the convergence ladder.
const MIN_RUNG: usize = 1000;

fn fit_for_link(data: &Dataset, link: Link) -> Result<FitResult> {
    match link {
        Link::Identity => ols_fit(data, true),
        Link::Logistic => logit_fit(data),
    }
}

fn require_univariate(config: &ExperimentConfig) -> Result<()> {
    if config.model.k() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: config.model.k(),
        });
    }
    Ok(())
}

fn require_grid(config: &ExperimentConfig) -> Result<&[f64]> {
    config
        .gamma_grid
        .as_deref()
        .ok_or_else(|| Error::invalid("gamma_grid", "this experiment needs a gamma grid"))
}

/// Builds one table row from a simulated batch.
fn summarize(
    config: &ExperimentConfig,
    garbling: &GarblingConfig,
    queries: &SimulatedQueries,
) -> Result<ExperimentRow> {
    let model = &config.model;
    let fit = fit_for_link(&queries.attacker_dataset()?, model.link)?;
    let d_closed = estimation_error_closed(model, garbling)?[0];
    let sigma2_closed =
        prediction_error_closed(model, garbling, &config.covariates)? + garbling.output_lambda * garbling.output_lambda;
    let recovered_beta = if model.k() == 1 && garbling.lambda > 0.0 {
        recover_beta_known_lambda_pair(&fit, garbling.lambda, garbling.output_lambda).ok()
    } else {
        None
    };
    Ok(ExperimentRow {
        gamma: garbling.gammas[0],
        lambda: garbling.lambda,
        n: queries.len(),
        d_closed,
        d_empirical: fit.slopes_hat[0] - model.slopes[0],
        sigma2_closed,
        sigma2_empirical: queries.index_sigma2(),
        sigma2_probability_scale: match model.link {
            Link::Logistic => Some(queries.probability_sigma2()),
            Link::Identity => None,
        },
        recovered_beta,
        seed: config.seed,
    })
}

/// Sample sizes n, n/2, n/4, ... down to [`MIN_RUNG`], in increasing order.
fn ladder(n: usize) -> Vec<usize> {
    let mut rungs = vec![n];
    let mut m = n / 2;
    while m >= MIN_RUNG {
        rungs.push(m);
        m /= 2;
    }
    rungs.reverse();
    rungs
}

/// Estimation error along a doubling ladder of sample sizes ending at
/// `config.n`. Each rung draws fresh data.
pub fn run_convergence(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    ladder(config.n)
        .into_iter()
        .enumerate()
        .map(|(rung, n)| {
            let q = simulate_queries(
                &config.model,
                &config.garbling,
                &config.covariates,
                n,
                config.seed,
                lanes::sub(lanes::LADDER, rung as u64),
                config.execution,
            )?;
            summarize(config, &config.garbling, &q)
        })
        .collect()
}

/// |β̂ − plim β̂| for each row, i.e. |d_empirical − d_closed|.
pub fn convergence_gaps(rows: &[ExperimentRow]) -> Vec<f64> {
    rows.iter().map(|r| (r.d_empirical - r.d_closed).abs()).collect()
}

/// One row per grid value γ (applied to every regressor), all at
/// `config.n` and on the same covariate and noise draws.
pub fn run_tradeoff_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    let grid = require_grid(config)?;
    grid.iter()
        .map(|&gamma| {
            let garbling = config.garbling_at(gamma);
            let q = simulate_queries(
                &config.model,
                &garbling,
                &config.covariates,
                config.n,
                config.seed,
                lanes::SWEEP,
                config.execution,
            )?;
            summarize(config, &garbling, &q)
        })
        .collect()
}

/// Sweep for a logistic model: log-odds σ² in `sigma2_empirical` and
/// probability-scale σ² in `sigma2_probability_scale`.
pub fn run_logistic_figure(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    if config.model.link != Link::Logistic {
        return Err(Error::invalid(
            "model.link",
            "the logistic figure needs a logistic model",
        ));
    }
    run_tradeoff_sweep(config)
}

/// R² of the simple regression of `sigma2_empirical` on γ².
pub fn quadratic_fit_r2(rows: &[ExperimentRow]) -> f64 {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.gamma * r.gamma).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sigma2_empirical).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy * sxy / (sxx * syy)
}

/// 1 − SS_res/SS_tot of `sigma2_empirical` against `sigma2_closed`.
pub fn closed_form_r2(rows: &[ExperimentRow]) -> f64 {
    let n = rows.len() as f64;
    let my = rows.iter().map(|r| r.sigma2_empirical).sum::<f64>() / n;
    let ss_tot: f64 = rows.iter().map(|r| (r.sigma2_empirical - my).powi(2)).sum();
    let ss_res: f64 = rows
        .iter()
        .map(|r| (r.sigma2_empirical - r.sigma2_closed).powi(2))
        .sum();
    1.0 - ss_res / ss_tot
}

/// A closed form that its empirical column failed to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceViolation {
    pub quantity: String,
    pub gamma: f64,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl fmt::Display for ToleranceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at gamma={}: observed {} vs expected {} (tolerance {}%)",
            self.quantity,
            self.gamma,
            self.observed,
            self.expected,
            self.tolerance * 100.0
        )
    }
}

fn relative_check(quantity: &str, gamma: f64, observed: f64, expected: f64, tol: f64) -> Option<ToleranceViolation> {
    let ok = if expected == 0.0 {
        observed.abs() <= 1e-12
    } else {
        (observed - expected).abs() <= tol * expected.abs()
    };
    (!ok).then(|| ToleranceViolation {
        quantity: quantity.to_string(),
        gamma,
        observed,
        expected,
        tolerance: tol,
    })
}

/// First row whose β̂ misses plim β̂ = (1+γ)β by more than the estimation
/// tolerance, or whose σ² misses the closed form by more than the
/// prediction tolerance. Rows with the identity link only; logistic rows
/// are judged on σ² alone.
pub fn check_rows(config: &ExperimentConfig, rows: &[ExperimentRow]) -> Option<ToleranceViolation> {
    let beta = config.model.slopes[0];
    let tol = config.tolerances;
    rows.iter().find_map(|r| {
        let d = (config.model.link == Link::Identity)
            .then(|| {
                relative_check(
                    "beta_hat",
                    r.gamma,
                    beta + r.d_empirical,
                    beta + r.d_closed,
                    tol.estimation,
                )
            })
            .flatten();
        d.or_else(|| {
            relative_check(
                "sigma2_empirical",
                r.gamma,
                r.sigma2_empirical,
                r.sigma2_closed,
                tol.prediction,
            )
        })
    })
}

/// Checks for the logistic sweep: the log-odds column follows the closed
/// form (R² > 0.99) and probability-σ² / log-odds-σ² falls as γ grows.
pub fn check_logistic_figure(rows: &[ExperimentRow]) -> Option<ToleranceViolation> {
    let r2 = closed_form_r2(rows);
    if r2.is_nan() || r2 <= 0.99 {
        return Some(ToleranceViolation {
            quantity: "closed_form_r2".to_string(),
            gamma: f64::NAN,
            observed: r2,
            expected: 1.0,
            tolerance: 0.01,
        });
    }
    let ratios: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sigma2_empirical > 0.0)
        .filter_map(|r| r.sigma2_probability_scale.map(|p| (r.gamma, p / r.sigma2_empirical)))
        .collect();
    ratios.windows(2).find_map(|w| {
        (w[1].1 >= w[0].1).then(|| ToleranceViolation {
            quantity: "probability_to_log_odds_ratio".to_string(),
            gamma: w[1].0,
            observed: w[1].1,
            expected: w[0].1,
            tolerance: 0.0,
        })
    })
}

/// Parameters of the recovery experiment beyond the base config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScenario {
    /// The mis-specified attacker assumes λ' = factor·λ.
    pub misspecified_factor: f64,
    /// λ₂ used for the output-noise defense.
    pub output_lambda: f64,
}

impl Default for RecoveryScenario {
    fn default() -> Self {
        RecoveryScenario {
            misspecified_factor: 2.0,
            output_lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerOutcome {
    pub label: String,
    pub assumed_lambda: f64,
    pub assumed_output_lambda: f64,
    /// λ₂ the service actually used for this attacker's data.
    pub service_output_lambda: f64,
    pub beta_hat: f64,
    pub residual_variance: f64,
    pub recovered_beta: f64,
    /// Probability limit of `recovered_beta`.
    pub expected_limit: f64,
    /// |recovered − β| / |β|.
    pub relative_error: f64,
    /// Both square-root branches (β̂ − s/λ, β̂ + s/λ).
    pub candidates: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub n: usize,
    pub seed: u64,
    pub attackers: Vec<AttackerOutcome>,
}

impl RecoveryReport {
    pub fn attacker(&self, label: &str) -> Option<&AttackerOutcome> {
        self.attackers.iter().find(|a| a.label == label)
    }
}

/// [`run_recovery_attack_with`] using `config.garbling.output_lambda` for
/// the output-noise defense when positive, otherwise λ₂ = 0.5.
pub fn run_recovery_attack(config: &ExperimentConfig) -> Result<RecoveryReport> {
    let mut scenario = RecoveryScenario::default();
    if config.garbling.output_lambda > 0.0 {
        scenario.output_lambda = config.garbling.output_lambda;
    }
    run_recovery_attack_with(config, &scenario)
}

/// Three attackers against a univariate service:
///
/// * `known_lambda`: knows λ, service adds no output noise.
/// * `misspecified_lambda`: assumes λ' = factor·λ on the same data.
/// * `output_noise_lambda_only` / `output_noise_both`: the service adds
///   output noise λ₂; one attacker knows only λ, the other knows (λ, λ₂).
pub fn run_recovery_attack_with(config: &ExperimentConfig, scenario: &RecoveryScenario) -> Result<RecoveryReport> {
    config.validate()?;
    require_univariate(config)?;
    let lambda = config.garbling.lambda;
    if lambda <= 0.0 {
        return Err(Error::ZeroLambda);
    }
    if !(scenario.misspecified_factor > 0.0 && scenario.output_lambda > 0.0) {
        return Err(Error::invalid("scenario", "factor and output_lambda must be positive"));
    }
    let beta = config.model.slopes[0];
    let gamma = config.garbling.gammas[0];
    let bg = beta * gamma;

    let plain = GarblingConfig {
        output_lambda: 0.0,
        ..config.garbling.clone()
    };
    let noisy = GarblingConfig {
        output_lambda: scenario.output_lambda,
        ..config.garbling.clone()
    };
    let simulate = |g: &GarblingConfig, lane| {
        simulate_queries(
            &config.model,
            g,
            &config.covariates,
            config.n,
            config.seed,
            lane,
            config.execution,
        )
        .and_then(|q| fit_for_link(&q.attacker_dataset()?, config.model.link))
    };
    let plain_fit = simulate(&plain, lanes::RECOVERY)?;
    let noisy_fit = simulate(&noisy, lanes::RECOVERY_OUTPUT_NOISE)?;

    let beta_limit = (1.0 + gamma) * beta;
    let outcome = |label: &str, fit: &FitResult, assumed_lambda, assumed_output: f64, service_output: f64| {
        let recovered = recover_beta_known_lambda_pair(fit, assumed_lambda, assumed_output)?;
        let resid_limit = bg * bg * lambda * lambda + service_output * service_output;
        let expected = beta_limit - (resid_limit - assumed_output * assumed_output).max(0.0).sqrt() / assumed_lambda;
        Ok::<_, Error>(AttackerOutcome {
            label: label.to_string(),
            assumed_lambda,
            assumed_output_lambda: assumed_output,
            service_output_lambda: service_output,
            beta_hat: fit.slope()?,
            residual_variance: fit.residual_variance,
            recovered_beta: recovered,
            expected_limit: expected,
            relative_error: (recovered - beta).abs() / beta.abs(),
            candidates: recovery_candidates(fit, assumed_lambda, assumed_output)?,
        })
    };

    // Knowing only λ means treating λ₂ as zero.
    let naive = outcome(
        "output_noise_lambda_only",
        &noisy_fit,
        lambda,
        0.0,
        scenario.output_lambda,
    )?;

    Ok(RecoveryReport {
        beta,
        gamma,
        lambda,
        n: config.n,
        seed: config.seed,
        attackers: vec![
            outcome("known_lambda", &plain_fit, lambda, 0.0, 0.0)?,
            outcome(
                "misspecified_lambda",
                &plain_fit,
                lambda * scenario.misspecified_factor,
                0.0,
                0.0,
            )?,
            naive,
            outcome(
                "output_noise_both",
                &noisy_fit,
                lambda,
                scenario.output_lambda,
                scenario.output_lambda,
            )?,
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSampleReport {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Mean of (β̂ − β)² over replicates, no-intercept fits.
    pub mse_empirical: f64,
    /// Inverse-chi-square value; present for standard-normal x only.
    pub mse_analytic: Option<f64>,
    /// Closed form with E[(Σx²)⁻¹] estimated by resampling.
    pub mse_monte_carlo_moment: f64,
    /// (βγ)², the large-sample limit.
    pub asymptote: f64,
    /// |empirical − reference| / reference, reference = analytic when
    /// available, else the resampled-moment value.
    pub relative_error: f64,
}

/// Monte Carlo MSE of the no-intercept slope at `config.n` over
/// `config.replicates` independent query sets.
pub fn run_small_sample(config: &ExperimentConfig) -> Result<SmallSampleReport> {
    config.validate()?;
    require_univariate(config)?;
    if config.replicates < crate::tradeoff::MIN_MOMENT_DRAWS {
        return Err(Error::invalid(
            "replicates",
            format!(
                "small-sample runs need at least {} replicates",
                crate::tradeoff::MIN_MOMENT_DRAWS
            ),
        ));
    }
    let n = config.n;
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let model = &config.model;
    let beta = model.slopes[0];
    let sampler = CovariateSampler::new(&config.covariates)?;

    let errors = map_indexed(config.execution, config.replicates, |i| -> Result<f64> {
        let mut r = rng::stream(config.seed, lanes::REPLICATE, i as u64);
        let mut x = vec![0.0; n];
        let mut z = [0.0];
        for xi in x.iter_mut() {
            sampler.sample_into(&mut r, &mut z, std::slice::from_mut(xi));
        }
        let mut scratch = crate::garbler::GarbleScratch::new(1);
        let mut y = Vec::with_capacity(n);
        for xi in &x {
            let idx = crate::garbler::garbled_index_with(
                model,
                std::slice::from_ref(xi),
                &config.garbling,
                &mut r,
                &mut scratch,
            )?;
            y.push(idx.garbled);
        }
        let fit = ols_fit(&Dataset::univariate(x, Some(y))?, false)?;
        Ok((fit.slopes_hat[0] - beta).powi(2))
    });
    let mut total = 0.0;
    for e in errors {
        total += e?;
    }
    let mse_empirical = total / config.replicates as f64;

    let mse_analytic = if config.covariates.is_standard_normal() && n > 2 {
        Some(small_sample_mse(
            model,
            &config.garbling,
            n,
            &config.covariates,
            MomentMethod::Analytic,
        )?)
    } else {
        None
    };
    let mse_monte_carlo_moment = small_sample_mse(
        model,
        &config.garbling,
        n,
        &config.covariates,
        MomentMethod::MonteCarlo {
            draws: config.replicates,
            seed: config.seed,
            include_intercept: false,
        },
    )?;
    let reference = mse_analytic.unwrap_or(mse_monte_carlo_moment);
    let bg = beta * config.garbling.gammas[0];
    Ok(SmallSampleReport {
        n,
        replicates: config.replicates,
        seed: config.seed,
        mse_empirical,
        mse_analytic,
        mse_monte_carlo_moment,
        asymptote: bg * bg,
        relative_error: if reference == 0.0 {
            mse_empirical.abs()
        } else {
            (mse_empirical - reference).abs() / reference
        },
    })
}

/// [`run_small_sample`] at each sample size in `ns`.
pub fn run_small_sample_ladder(config: &ExperimentConfig, ns: &[usize]) -> Result<Vec<SmallSampleReport>> {
    ns.iter()
        .map(|&n| {
            let c = ExperimentConfig { n, ..config.clone() };
            run_small_sample(&c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovariateSpec, RegressionModel};

    fn univariate(beta: f64, gamma: f64, lambda: f64, n: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            RegressionModel::linear(0.0, vec![beta]).unwrap(),
            GarblingConfig::new(vec![gamma], lambda).unwrap(),
            CovariateSpec::univariate(1.0, 1).unwrap(),
            n,
            42,
        )
        .unwrap()
    }

    #[test]
    fn ladder_doubles_up_to_n() {
        assert_eq!(ladder(8000), vec![1000, 2000, 4000, 8000]);
        assert_eq!(ladder(500), vec![500]);
    }

    #[test]
    fn zero_gamma_rows_have_zero_errors() {
        let cfg = univariate(3.0, 0.0, 1.0, 20_000).with_grid(vec![0.0, 0.5]);
        let rows = run_tradeoff_sweep(&cfg).unwrap();
        assert_eq!(rows[0].d_closed, 0.0);
        assert_eq!(rows[0].sigma2_closed, 0.0);
        assert_eq!(rows[0].sigma2_empirical, 0.0);
        assert!(rows[0].d_empirical.abs() < 1e-9);
        assert!(rows[1].sigma2_empirical > 0.0);
    }

    #[test]
    fn sweep_requires_grid() {
        assert!(run_tradeoff_sweep(&univariate(1.0, 0.1, 1.0, 100)).is_err());
        assert!(run_logistic_figure(&univariate(1.0, 0.1, 1.0, 100).with_grid(vec![0.1])).is_err());
    }

    #[test]
    fn small_sample_rejects_few_replicates() {
        let cfg = univariate(1.0, 0.5, 1.0, 10).with_replicates(10);
        assert!(run_small_sample(&cfg).is_err());
    }

    #[test]
    fn recovery_requires_positive_lambda() {
        let cfg = univariate(3.0, 0.3, 0.0, 1000);
        assert_eq!(run_recovery_attack(&cfg), Err(Error::ZeroLambda));
    }

    #[test]
    fn r2_helpers() {
        let rows: Vec<ExperimentRow> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&g| ExperimentRow {
                gamma: g,
                lambda: 1.0,
                n: 1,
                d_closed: 0.0,
                d_empirical: 0.0,
                sigma2_closed: 2.0 * g * g,
                sigma2_empirical: 2.0 * g * g,
                sigma2_probability_scale: None,
                recovered_beta: None,
                seed: 0,
            })
            .collect();
        assert!((quadratic_fit_r2(&rows) - 1.0).abs() < 1e-12);
        assert!((closed_form_r2(&rows) - 1.0).abs() < 1e-12);
    }
}
