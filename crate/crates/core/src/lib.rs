//! Input garbling defenses for regression prediction services.
//!
//! A service that answers queries with f_θ(g(x)) instead of f_θ(x), where
//! g(x) = x + γ(x + λε), injects endogeneity into any dataset an attacker
//! collects: least squares on the returned outputs converges to (1+γ)β
//! rather than β. This crate provides the garbling functions, the
//! attacker's estimators and recovery attacks, closed-form error
//! trade-offs, and a seeded Monte Carlo harness that checks each closed
//! form against simulated attacks.

pub mod error;
pub mod estimators;
pub mod garbler;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod tradeoff;

pub use error::{Error, Result};
pub use estimators::{
    logit_fit, ols_fit, recover_beta_known_lambda, recover_beta_known_lambda_pair, recovery_candidates, FitResult,
};
pub use garbler::{garble, garble_with_noise, garbled_predict, garbled_predict_with_noise, GarblingConfig, NoiseMode};
pub use harness::{Execution, ExperimentConfig, ExperimentRow};
pub use linalg::Matrix;
pub use model::{logistic, logit, predict_clean, sample_covariates, CovariateSpec, Dataset, Link, RegressionModel};
pub use tradeoff::{
    choose_gamma_signs, estimation_error_closed, prediction_error_closed, small_sample_mse, tradeoff_point,
    MomentMethod, TradeoffPoint,
};
