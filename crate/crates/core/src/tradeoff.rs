//! Closed-form trade-offs between the attacker's estimation error and the
//! service's prediction error.
//!
//! With Γᵢ = βᵢγᵢ the large-sample results are
//!
//! * estimation error  plim β̂ᵢ − βᵢ = βᵢγᵢ
//! * prediction error  σ² = ΓᵀΣₓΓ + λ²‖Γ‖² (independent noise) or
//!   ΓᵀΣₓΓ + λ²(ΣΓᵢ)² (one shared draw)
//!
//! and for a univariate no-intercept fit at finite n,
//! E[(β̂ − β)²] = (βγ)² + (βγλ)² E[(Σxᵢ²)⁻¹].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garbler::{GarblingConfig, NoiseMode};
use crate::model::{CovariateSampler, CovariateSpec, RegressionModel};
use crate::rng;

/// Draws below this count are rejected for the Monte Carlo moment.
pub const MIN_MOMENT_DRAWS: usize = 10_000;

/// Exhaustive sign search is capped at 2^20 assignments.
pub const MAX_SIGN_SEARCH_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub gamma: Vec<f64>,
    pub lambda: f64,
    pub estimation_error: Vec<f64>,
    /// 𝒟ᵢ/βᵢ, which is γᵢ by construction.
    pub estimation_error_relative: Vec<f64>,
    pub prediction_error_sq: f64,
}

fn gamma_beta(model: &RegressionModel, config: &GarblingConfig) -> Result<Vec<f64>> {
    config.validate_for(model)?;
    Ok(model.slopes.iter().zip(&config.gammas).map(|(b, g)| b * g).collect())
}

/// βᵢγᵢ for each regressor.
pub fn estimation_error_closed(model: &RegressionModel, config: &GarblingConfig) -> Result<Vec<f64>> {
    gamma_beta(model, config)
}

/// σ² on the linear index (log-odds for the logistic link).
pub fn prediction_error_closed(model: &RegressionModel, config: &GarblingConfig, spec: &CovariateSpec) -> Result<f64> {
    let big_gamma = gamma_beta(model, config)?;
    spec.validate()?;
    if spec.k() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            actual: spec.k(),
        });
    }
    let systematic = spec.covariance.quadratic_form(&big_gamma);
    let noise = match config.noise_mode {
        NoiseMode::IndependentPerRegressor => big_gamma.iter().map(|g| g * g).sum::<f64>(),
        NoiseMode::SharedAcrossRegressors => big_gamma.iter().sum::<f64>().powi(2),
    };
    // Σₓ is PSD, so negative values are rounding only.
    Ok((systematic + config.lambda * config.lambda * noise).max(0.0))
}

/// Both errors for one configuration.
pub fn tradeoff_point(model: &RegressionModel, config: &GarblingConfig, spec: &CovariateSpec) -> Result<TradeoffPoint> {
    Ok(TradeoffPoint {
        gamma: config.gammas.clone(),
        lambda: config.lambda,
        estimation_error: estimation_error_closed(model, config)?,
        estimation_error_relative: config.gammas.clone(),
        prediction_error_sq: prediction_error_closed(model, config, spec)?,
    })
}

/// How E[(Σxᵢ²)⁻¹] is obtained for [`small_sample_mse`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentMethod {
    /// 1/(n−2), exact for standard-normal x and a no-intercept fit.
    Analytic,
    /// Average of 1/Σxᵢ² (or 1/Σ(xᵢ − x̄)² with an intercept) over
    /// `draws` resampled covariate sets.
    MonteCarlo {
        draws: usize,
        seed: u64,
        include_intercept: bool,
    },
}

/// E[(Σxᵢ²)⁻¹] (or its centered version) for n rows of `spec`.
pub fn inverse_sum_squares_moment(n: usize, spec: &CovariateSpec, method: MomentMethod) -> Result<f64> {
    if spec.k() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: spec.k(),
        });
    }
    match method {
        MomentMethod::Analytic => {
            if !spec.is_standard_normal() {
                return Err(Error::UnsupportedSpec(
                    "analytic moment requires x ~ N(0, 1)".to_string(),
                ));
            }
            if n <= 2 {
                return Err(Error::UndefinedMoment { n });
            }
            Ok(1.0 / (n as f64 - 2.0))
        }
        MomentMethod::MonteCarlo {
            draws,
            seed,
            include_intercept,
        } => {
            if draws < MIN_MOMENT_DRAWS {
                return Err(Error::invalid(
                    "draws",
                    format!("at least {MIN_MOMENT_DRAWS} draws are required, got {draws}"),
                ));
            }
            let min_n = if include_intercept { 2 } else { 1 };
            if n < min_n {
                return Err(Error::InsufficientData { needed: min_n, got: n });
            }
            let sampler = CovariateSampler::new(spec)?;
            let mut scratch = [0.0];
            let mut x = vec![0.0; n];
            let mut total = 0.0;
            for d in 0..draws {
                let mut r = rng::stream(seed, rng::lanes::MOMENT, d as u64);
                for xi in x.iter_mut() {
                    sampler.sample_into(&mut r, &mut scratch, std::slice::from_mut(xi));
                }
                let ss = if include_intercept {
                    let mean = x.iter().sum::<f64>() / n as f64;
                    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                } else {
                    x.iter().map(|v| v * v).sum::<f64>()
                };
                total += 1.0 / ss;
            }
            Ok(total / draws as f64)
        }
    }
}

/// Finite-sample E[(β − β̂)²] for a univariate model.
pub fn small_sample_mse(
    model: &RegressionModel,
    config: &GarblingConfig,
    n: usize,
    spec: &CovariateSpec,
    method: MomentMethod,
) -> Result<f64> {
    let big_gamma = gamma_beta(model, config)?;
    if model.k() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: model.k(),
        });
    }
    let bg = big_gamma[0];
    let noise = bg * config.lambda;
    if noise == 0.0 {
        return Ok(bg * bg);
    }
    let moment = inverse_sum_squares_moment(n, spec, method)?;
    Ok(bg * bg + noise * noise * moment)
}

/// Picks a sign for each |γᵢ| that minimizes σ² by exhaustive search.
///
/// Assignments are visited in order of the bitmask of negated
/// coordinates, starting from all-positive; only strict improvements
/// replace the incumbent, so ties resolve toward all-positive.
pub fn choose_gamma_signs(
    model: &RegressionModel,
    gamma_magnitudes: &[f64],
    spec: &CovariateSpec,
    lambda: f64,
    mode: NoiseMode,
) -> Result<GarblingConfig> {
    let k = model.k();
    model.check_dim(gamma_magnitudes.len())?;
    if k > MAX_SIGN_SEARCH_K {
        return Err(Error::TooManyRegressors {
            k,
            limit: MAX_SIGN_SEARCH_K,
        });
    }
    if gamma_magnitudes.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::invalid("gamma_magnitudes", "must be finite and nonnegative"));
    }
    let mut config = GarblingConfig::new(gamma_magnitudes.to_vec(), lambda)?.with_noise_mode(mode);
    let mut best = prediction_error_closed(model, &config, spec)?;
    let mut best_mask = 0u32;
    let mut candidate = config.clone();
    for mask in 1u32..(1u32 << k) {
        for (i, g) in candidate.gammas.iter_mut().enumerate() {
            *g = if mask & (1 << i) != 0 {
                -gamma_magnitudes[i]
            } else {
                gamma_magnitudes[i]
            };
        }
        let s = prediction_error_closed(model, &candidate, spec)?;
        if s < best - 1e-12 * best.abs().max(1.0) {
            best = s;
            best_mask = mask;
        }
    }
    for (i, g) in config.gammas.iter_mut().enumerate() {
        if best_mask & (1 << i) != 0 {
            *g = -*g;
        }
    }
    Ok(config)
}
