//! Attacker-side estimation: least squares on returned outputs, the
//! log-odds transform for probability outputs, and the identification
//! attacks that undo garbling when λ (and λ₂) are known.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{FactorError, Matrix};
use crate::model::{logit, Dataset};

/// Relative pivot tolerance for rank detection in the normal equations.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept_hat: f64,
    pub slopes_hat: Vec<f64>,
    /// Residual variance, normalized by N.
    pub residual_variance: f64,
    pub n: usize,
}

impl FitResult {
    /// Univariate slope β̂. Errors unless K = 1.
    pub fn slope(&self) -> Result<f64> {
        match self.slopes_hat.as_slice() {
            [b] => Ok(*b),
            other => Err(Error::DimensionMismatch {
                expected: 1,
                actual: other.len(),
            }),
        }
    }

    /// Σ̂, the residual standard deviation.
    pub fn residual_sd(&self) -> f64 {
        self.residual_variance.sqrt()
    }
}

/// Ordinary least squares via the normal equations.
///
/// With an intercept the regressors are centered first, which keeps the
/// cross-product matrix well conditioned; the intercept is then recovered
/// from the means.
pub fn ols_fit(data: &Dataset, include_intercept: bool) -> Result<FitResult> {
    let y = data.outputs().ok_or(Error::MissingOutputs)?;
    let k = data.k();
    let n = data.len();
    let needed = k + usize::from(include_intercept) + 1;
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }

    let (x_mean, y_mean) = if include_intercept {
        let mut xm = vec![0.0; k];
        for row in data.rows() {
            for (m, v) in xm.iter_mut().zip(row) {
                *m += v;
            }
        }
        xm.iter_mut().for_each(|m| *m /= n as f64);
        (xm, y.iter().sum::<f64>() / n as f64)
    } else {
        (vec![0.0; k], 0.0)
    };

    let mut xtx = Matrix::zeros(k);
    let mut xty = vec![0.0; k];
    let mut centered = vec![0.0; k];
    for (row, &yi) in data.rows().zip(y) {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = yi - y_mean;
        for i in 0..k {
            xty[i] += centered[i] * yc;
            for j in 0..=i {
                xtx[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[(j, i)] = xtx[(i, j)];
        }
    }

    let lower = xtx.cholesky(RANK_TOL).map_err(|e| {
        let column = match e {
            FactorError::ZeroPivot { column, .. } | FactorError::NegativePivot { column, .. } => column,
        };
        Error::Singular {
            column: format!("x{column}"),
        }
    })?;
    let slopes = lower.cholesky_solve(&xty);
    let intercept = if include_intercept {
        y_mean - slopes.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>()
    } else {
        0.0
    };

    let rss: f64 = data
        .rows()
        .zip(y)
        .map(|(row, yi)| {
            let fit = intercept + slopes.iter().zip(row).map(|(b, x)| b * x).sum::<f64>();
            (yi - fit).powi(2)
        })
        .sum();

    if slopes.iter().any(|b| !b.is_finite()) {
        return Err(Error::Singular {
            column: "x0".to_string(),
        });
    }

    Ok(FitResult {
        intercept_hat: intercept,
        slopes_hat: slopes,
        residual_variance: rss / n as f64,
        n,
    })
}

/// Least squares on the log-odds of probability outputs (with intercept).
pub fn logit_fit(data: &Dataset) -> Result<FitResult> {
    let p = data.outputs().ok_or(Error::MissingOutputs)?;
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidProbability { index, value });
    }
    let log_odds: Vec<f64> = p.iter().map(|&v| logit(v)).collect();
    let transformed = data.clone().with_outputs(log_odds)?;
    ols_fit(&transformed, true)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be finite and positive"));
    }
    Ok(())
}

/// β̂ − Σ̂/λ: recovers β when the attacker knows λ and the service adds no
/// output noise.
pub fn recover_beta_known_lambda(fit: &FitResult, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(fit.slope()? - fit.residual_sd() / lambda)
}

/// β̂ − sqrt(Σ̂² − λ₂²)/λ: recovery when both λ and the output-noise
/// scale λ₂ are known.
pub fn recover_beta_known_lambda_pair(fit: &FitResult, lambda: f64, output_lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(output_lambda.is_finite() && output_lambda >= 0.0) {
        return Err(Error::invalid("output_lambda", "must be finite and nonnegative"));
    }
    let output_variance = output_lambda * output_lambda;
    if fit.residual_variance < output_variance {
        return Err(Error::InconsistentOutputNoise {
            residual_variance: fit.residual_variance,
            output_variance,
        });
    }
    Ok(fit.slope()? - (fit.residual_variance - output_variance).sqrt() / lambda)
}

/// Both square-root branches of the identification equation, `(β̂ − s/λ,
/// β̂ + s/λ)` with s = sqrt(Σ̂² − λ₂²). The first is the attack as usually
/// stated (valid when βγ > 0); the second applies when βγ < 0.
pub fn recovery_candidates(fit: &FitResult, lambda: f64, output_lambda: f64) -> Result<(f64, f64)> {
    let minus = recover_beta_known_lambda_pair(fit, lambda, output_lambda)?;
    let beta_hat = fit.slope()?;
    Ok((minus, 2.0 * beta_hat - minus))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(beta_hat: f64, residual_variance: f64) -> FitResult {
        FitResult {
            intercept_hat: 0.0,
            slopes_hat: vec![beta_hat],
            residual_variance,
            n: 100,
        }
    }

    #[test]
    fn exact_fits() {
        let d = Dataset::univariate(vec![1.0, 2.0, 3.0], Some(vec![2.0, 4.0, 6.0])).unwrap();
        let f = ols_fit(&d, true).unwrap();
        assert!(f.intercept_hat.abs() < 1e-12);
        assert!((f.slopes_hat[0] - 2.0).abs() < 1e-12);
        assert!(f.residual_variance < 1e-24);

        let d = Dataset::univariate(vec![1.0, 2.0, 3.0], Some(vec![5.0, 5.0, 5.0])).unwrap();
        let f = ols_fit(&d, true).unwrap();
        assert!((f.intercept_hat - 5.0).abs() < 1e-12);
        assert!(f.slopes_hat[0].abs() < 1e-12);
        assert!(f.residual_variance < 1e-24);
    }

    #[test]
    fn no_intercept_fit() {
        let d = Dataset::univariate(vec![1.0, 2.0, 4.0], Some(vec![3.0, 6.0, 12.0])).unwrap();
        let f = ols_fit(&d, false).unwrap();
        assert_eq!(f.intercept_hat, 0.0);
        assert!((f.slopes_hat[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]];
        let d = Dataset::from_rows(&rows, Some(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(
            ols_fit(&d, true),
            Err(Error::Singular {
                column: "x1".to_string()
            })
        );
        let constant = Dataset::univariate(vec![2.0; 5], Some(vec![1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(
            ols_fit(&constant, true),
            Err(Error::Singular {
                column: "x0".to_string()
            })
        );
    }

    #[test]
    fn insufficient_data() {
        let d = Dataset::univariate(vec![1.0, 2.0], Some(vec![1.0, 2.0])).unwrap();
        assert_eq!(ols_fit(&d, true), Err(Error::InsufficientData { needed: 3, got: 2 }));
        assert!(ols_fit(&d, false).is_ok());
        let no_y = Dataset::univariate(vec![1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(ols_fit(&no_y, true), Err(Error::MissingOutputs));
    }

    #[test]
    fn logit_fit_examples() {
        let d = Dataset::univariate(vec![-1.0, 0.0, 1.0, 2.0], Some(vec![0.5; 4])).unwrap();
        let f = logit_fit(&d).unwrap();
        assert!(f.slopes_hat[0].abs() < 1e-12 && f.intercept_hat.abs() < 1e-12);

        let xs: Vec<f64> = (0..50).map(|i| -2.0 + i as f64 * 0.08).collect();
        let ps: Vec<f64> = xs.iter().map(|x| crate::model::logistic(2.0 + 3.0 * x)).collect();
        let f = logit_fit(&Dataset::univariate(xs, Some(ps)).unwrap()).unwrap();
        assert!((f.intercept_hat - 2.0).abs() < 1e-6);
        assert!((f.slopes_hat[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn logit_fit_rejects_non_probabilities() {
        let d = Dataset::univariate(vec![0.0, 1.0, 2.0], Some(vec![0.2, 1.5, 0.3])).unwrap();
        assert_eq!(logit_fit(&d), Err(Error::InvalidProbability { index: 1, value: 1.5 }));
        let edge = Dataset::univariate(vec![0.0, 1.0, 2.0], Some(vec![0.0, 1.0, 0.5])).unwrap();
        assert!(logit_fit(&edge).is_ok());
    }

    #[test]
    fn recovery_hand_values() {
        assert!((recover_beta_known_lambda(&fit(3.9, 0.81), 1.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(recover_beta_known_lambda(&fit(2.5, 0.0), 3.0).unwrap(), 2.5);
        assert_eq!(recover_beta_known_lambda(&fit(3.9, 0.81), 0.0), Err(Error::ZeroLambda));

        let pair = recover_beta_known_lambda_pair(&fit(3.9, 0.81 + 0.25), 1.0, 0.5).unwrap();
        assert!((pair - 3.0).abs() < 1e-12);
        let f = fit(3.7, 0.6);
        assert_eq!(
            recover_beta_known_lambda_pair(&f, 1.3, 0.0).unwrap(),
            recover_beta_known_lambda(&f, 1.3).unwrap()
        );
        assert!(matches!(
            recover_beta_known_lambda_pair(&fit(3.9, 0.2), 1.0, 0.5),
            Err(Error::InconsistentOutputNoise { .. })
        ));
    }

    #[test]
    fn ignoring_output_noise_biases_recovery_downward() {
        // Analytic limits with β=3, γ=0.3, λ=1, λ₂=1.
        let f = fit(3.9, 0.81 + 1.0);
        let naive = recover_beta_known_lambda(&f, 1.0).unwrap();
        let informed = recover_beta_known_lambda_pair(&f, 1.0, 1.0).unwrap();
        let expected_bias = f.residual_sd() - (f.residual_variance - 1.0).sqrt();
        assert!(expected_bias > 0.0);
        assert!((informed - naive - expected_bias).abs() < 1e-12);
        assert!((informed - 3.0).abs() < 1e-12);
    }

    #[test]
    fn candidates_bracket_beta_hat() {
        let (lo, hi) = recovery_candidates(&fit(3.9, 0.81), 1.0, 0.0).unwrap();
        assert!((lo - 3.0).abs() < 1e-12 && (hi - 4.8).abs() < 1e-12);
        // βγ < 0: β = -2, γ = 0.3 gives β̂ = -2.6, Σ̂ = 0.6; the plus branch is right.
        let (lo, hi) = recovery_candidates(&fit(-2.6, 0.36), 1.0, 0.0).unwrap();
        assert!((hi + 2.0).abs() < 1e-12 && (lo + 3.2).abs() < 1e-12);
    }

    #[test]
    fn recovery_requires_univariate_fit() {
        let f = FitResult {
            intercept_hat: 0.0,
            slopes_hat: vec![1.0, 2.0],
            residual_variance: 0.1,
            n: 10,
        };
        assert!(matches!(
            recover_beta_known_lambda(&f, 1.0),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        ));
    }
}
