//! Garbling functions: the defender's input perturbation
//! g(x)ᵢ = xᵢ + γᵢ(xᵢ + λεᵢ), with optional additive output noise.
//!
//! λ and λ₂ are standard deviations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegressionModel;

/// How the standard-normal draws are shared across regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseMode {
    /// One εᵢ per coordinate.
    #[default]
    #[serde(rename = "independent")]
    IndependentPerRegressor,
    /// A single ε reused by every coordinate.
    #[serde(rename = "shared")]
    SharedAcrossRegressors,
}

impl NoiseMode {
    /// Number of standard-normal draws consumed by one garbling.
    pub fn draws(self, k: usize) -> usize {
        match self {
            NoiseMode::IndependentPerRegressor => k,
            NoiseMode::SharedAcrossRegressors => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarblingConfig {
    pub gammas: Vec<f64>,
    pub lambda: f64,
    #[serde(default)]
    pub output_lambda: f64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
}

impl GarblingConfig {
    pub fn new(gammas: Vec<f64>, lambda: f64) -> Result<Self> {
        let cfg = GarblingConfig {
            gammas,
            lambda,
            output_lambda: 0.0,
            noise_mode: NoiseMode::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// No garbling at all for K regressors.
    pub fn identity(k: usize) -> Self {
        GarblingConfig {
            gammas: vec![0.0; k],
            lambda: 0.0,
            output_lambda: 0.0,
            noise_mode: NoiseMode::default(),
        }
    }

    pub fn with_output_lambda(mut self, output_lambda: f64) -> Self {
        self.output_lambda = output_lambda;
        self
    }

    pub fn with_noise_mode(mut self, mode: NoiseMode) -> Self {
        self.noise_mode = mode;
        self
    }

    pub fn k(&self) -> usize {
        self.gammas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::invalid("gammas", "at least one multiplier is required"));
        }
        if self.gammas.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("gammas", "multipliers must be finite"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be finite and nonnegative"));
        }
        if !(self.output_lambda.is_finite() && self.output_lambda >= 0.0) {
            return Err(Error::invalid("output_lambda", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Checks the config against a model's K.
    pub fn validate_for(&self, model: &RegressionModel) -> Result<()> {
        self.validate()?;
        model.check_dim(self.k())
    }
}

/// g(x) with the standard-normal draws supplied by the caller.
///
/// `eps` holds K draws in independent mode and (at least) one in shared mode.
pub fn garble_with_noise(x: &[f64], config: &GarblingConfig, eps: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    garble_into(x, config, eps, &mut out)?;
    Ok(out)
}

pub(crate) fn garble_into(x: &[f64], config: &GarblingConfig, eps: &[f64], out: &mut [f64]) -> Result<()> {
    if x.len() != config.k() {
        return Err(Error::DimensionMismatch {
            expected: config.k(),
            actual: x.len(),
        });
    }
    let needed = config.noise_mode.draws(x.len());
    if eps.len() < needed {
        return Err(Error::DimensionMismatch {
            expected: needed,
            actual: eps.len(),
        });
    }
    for (i, o) in out.iter_mut().enumerate() {
        let e = match config.noise_mode {
            NoiseMode::IndependentPerRegressor => eps[i],
            NoiseMode::SharedAcrossRegressors => eps[0],
        };
        *o = x[i] + config.gammas[i] * (x[i] + config.lambda * e);
    }
    Ok(())
}

/// Draws the input noise for one garbling (K or 1 normals, by mode).
pub(crate) fn draw_input_noise<R: Rng + ?Sized>(config: &GarblingConfig, rng: &mut R, eps: &mut [f64]) {
    for e in eps.iter_mut().take(config.noise_mode.draws(config.k())) {
        *e = rng.sample(StandardNormal);
    }
}

/// g(x) with fresh noise from `rng`.
pub fn garble<R: Rng + ?Sized>(x: &[f64], config: &GarblingConfig, rng: &mut R) -> Result<Vec<f64>> {
    if x.len() != config.k() {
        return Err(Error::DimensionMismatch {
            expected: config.k(),
            actual: x.len(),
        });
    }
    let mut eps = vec![0.0; x.len()];
    draw_input_noise(config, rng, &mut eps);
    garble_with_noise(x, config, &eps)
}

/// Clean and garbled linear indices for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarbledIndex {
    pub clean: f64,
    pub garbled: f64,
}

/// Reusable buffers for garbling many rows without allocating.
#[derive(Debug, Clone)]
pub(crate) struct GarbleScratch {
    eps: Vec<f64>,
    garbled: Vec<f64>,
}

impl GarbleScratch {
    pub(crate) fn new(k: usize) -> Self {
        GarbleScratch {
            eps: vec![0.0; k],
            garbled: vec![0.0; k],
        }
    }
}

/// Linear index of f_θ(g(x)) with output noise, alongside the clean index.
/// Draw order: input noise first, then one output-noise draw when λ₂ > 0.
pub(crate) fn garbled_index_with<R: Rng + ?Sized>(
    model: &RegressionModel,
    x: &[f64],
    config: &GarblingConfig,
    rng: &mut R,
    scratch: &mut GarbleScratch,
) -> Result<GarbledIndex> {
    model.check_dim(x.len())?;
    draw_input_noise(config, rng, &mut scratch.eps);
    garble_into(x, config, &scratch.eps, &mut scratch.garbled)?;
    let mut garbled = model.index_unchecked(&scratch.garbled);
    if config.output_lambda > 0.0 {
        let eta: f64 = rng.sample(StandardNormal);
        garbled += config.output_lambda * eta;
    }
    Ok(GarbledIndex {
        clean: model.index_unchecked(x),
        garbled,
    })
}

/// f_θ(g(x)) plus output noise μ(0, λ₂²) on the linear index.
///
/// For the logistic link the output noise is added to the log-odds, so the
/// result stays a probability.
pub fn garbled_predict<R: Rng + ?Sized>(
    model: &RegressionModel,
    x: &[f64],
    config: &GarblingConfig,
    rng: &mut R,
) -> Result<f64> {
    config.validate_for(model)?;
    let mut scratch = GarbleScratch::new(model.k());
    let idx = garbled_index_with(model, x, config, rng, &mut scratch)?;
    Ok(model.link.apply(idx.garbled))
}

/// [`garbled_predict`] with pinned input noise `eps` and output noise `eta`.
pub fn garbled_predict_with_noise(
    model: &RegressionModel,
    x: &[f64],
    config: &GarblingConfig,
    eps: &[f64],
    eta: f64,
) -> Result<f64> {
    config.validate_for(model)?;
    let g = garble_with_noise(x, config, eps)?;
    let index = model.index_unchecked(&g) + config.output_lambda * eta;
    Ok(model.link.apply(index))
}
