//! The defended model, clean prediction, and covariate sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{FactorError, Matrix};

/// Output link of the defended model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Logistic,
}

impl Link {
    pub fn as_str(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logistic => "logistic",
        }
    }

    /// Maps a linear index to the model output.
    pub fn apply(self, index: f64) -> f64 {
        match self {
            Link::Identity => index,
            Link::Logistic => logistic(index),
        }
    }
}

/// Numerically stable logistic function. The result is clamped into the
/// open interval (0, 1) so that saturated tails never report exactly 0 or 1.
pub fn logistic(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Smallest and largest probability accepted by [`logit`] before clamping.
pub const LOGIT_CLAMP: f64 = 1e-12;

/// Log-odds ln(p / (1 - p)), with p clamped to `[1e-12, 1 - 1e-12]`.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
    if p < 0.5 {
        (p / (1.0 - p)).ln()
    } else {
        // ln p - ln(1 - p), with ln p taken through ln_1p for p near 1
        (-(1.0 - p)).ln_1p() - (1.0 - p).ln()
    }
}

/// The defended model's true parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub link: Link,
}

impl RegressionModel {
    pub fn new(intercept: f64, slopes: Vec<f64>, link: Link) -> Result<Self> {
        let model = RegressionModel {
            intercept,
            slopes,
            link,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn linear(intercept: f64, slopes: Vec<f64>) -> Result<Self> {
        Self::new(intercept, slopes, Link::Identity)
    }

    pub fn logistic(intercept: f64, slopes: Vec<f64>) -> Result<Self> {
        Self::new(intercept, slopes, Link::Logistic)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() {
            return Err(Error::invalid("slopes", "at least one slope is required"));
        }
        if !self.intercept.is_finite() || self.slopes.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("model", "parameters must be finite"));
        }
        Ok(())
    }

    /// Number of regressors K.
    pub fn k(&self) -> usize {
        self.slopes.len()
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: len,
            });
        }
        Ok(())
    }

    /// α + β·x without the link.
    pub fn linear_index(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.index_unchecked(x))
    }

    pub(crate) fn index_unchecked(&self, x: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Clean (ungarbled) prediction f_θ(x).
pub fn predict_clean(model: &RegressionModel, x: &[f64]) -> Result<f64> {
    Ok(model.link.apply(model.linear_index(x)?))
}

/// Distribution of attacker/user queries: multivariate normal with the
/// given mean and covariance, plus the number of rows to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub n: usize,
}

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

impl CovariateSpec {
    pub fn new(mean: Vec<f64>, covariance: Matrix, n: usize) -> Result<Self> {
        let spec = CovariateSpec { mean, covariance, n };
        spec.validate()?;
        Ok(spec)
    }

    /// Zero-mean spec with the given covariance.
    pub fn centered(covariance: Matrix, n: usize) -> Result<Self> {
        Self::new(vec![0.0; covariance.dim()], covariance, n)
    }

    /// Zero-mean univariate spec with variance `var`.
    pub fn univariate(var: f64, n: usize) -> Result<Self> {
        Self::centered(Matrix::diagonal(&[var]), n)
    }

    /// Zero-mean bivariate spec.
    pub fn bivariate(var1: f64, var2: f64, cov: f64, n: usize) -> Result<Self> {
        let m = Matrix::from_rows(&[vec![var1, cov], vec![cov, var2]]).expect("2x2");
        Self::centered(m, n)
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() {
            return Err(Error::invalid("mean", "at least one regressor is required"));
        }
        if self.covariance.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: self.covariance.dim(),
            });
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mean", "entries must be finite"));
        }
        for row in self.covariance.rows() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("covariance", "entries must be finite"));
            }
        }
        let scale = self.covariance.max_abs_diagonal().max(1.0);
        let (row, col, diff) = self.covariance.max_asymmetry();
        if diff > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { row, col, diff });
        }
        self.factor().map(|_| ())
    }

    /// Lower factor of the covariance (semi-definite allowed).
    pub fn factor(&self) -> Result<Matrix> {
        let scale = self.covariance.max_abs_diagonal().max(1.0);
        self.covariance
            .cholesky_semidefinite(PSD_TOL * scale)
            .map_err(|e| match e {
                FactorError::ZeroPivot { column, pivot } | FactorError::NegativePivot { column, pivot } => {
                    Error::NotPositiveSemiDefinite { column, pivot }
                }
            })
    }

    /// True for a univariate standard normal spec.
    pub fn is_standard_normal(&self) -> bool {
        self.k() == 1 && self.mean[0] == 0.0 && self.covariance[(0, 0)] == 1.0
    }
}

/// Draws rows from a factored multivariate normal.
#[derive(Debug, Clone)]
pub struct CovariateSampler {
    mean: Vec<f64>,
    lower: Matrix,
}

impl CovariateSampler {
    pub fn new(spec: &CovariateSpec) -> Result<Self> {
        spec.validate()?;
        Ok(CovariateSampler {
            mean: spec.mean.clone(),
            lower: spec.factor()?,
        })
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Fills `out` with one draw; `scratch` must have length K.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut [f64], out: &mut [f64]) {
        for z in scratch.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.lower.lower_mul(scratch, out);
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o += m;
        }
    }
}

/// Query matrix X (row-major, N×K) and optional returned outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    k: usize,
    inputs: Vec<f64>,
    outputs: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major input buffer.
    pub fn from_flat(k: usize, inputs: Vec<f64>, outputs: Option<Vec<f64>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "at least one column is required"));
        }
        if !inputs.len().is_multiple_of(k) {
            return Err(Error::invalid("inputs", "length is not a multiple of K"));
        }
        let n = inputs.len() / k;
        if let Some((i, _)) = inputs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: i / k, col: i % k });
        }
        if let Some(y) = &outputs {
            if y.len() != n {
                return Err(Error::invalid("outputs", format!("{} outputs for {} rows", y.len(), n)));
            }
            if let Some((i, _)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: k });
            }
        }
        Ok(Dataset { k, inputs, outputs })
    }

    pub fn from_rows(rows: &[Vec<f64>], outputs: Option<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: bad.len(),
            });
        }
        Self::from_flat(k, rows.concat(), outputs)
    }

    /// Univariate dataset from a single regressor column.
    pub fn univariate(x: Vec<f64>, y: Option<Vec<f64>>) -> Result<Self> {
        Self::from_flat(1, x, y)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.k)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> Option<&[f64]> {
        self.outputs.as_deref()
    }

    pub fn with_outputs(self, outputs: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.k, self.inputs, Some(outputs))
    }
}

/// Draws `spec.n` i.i.d. rows from the spec's multivariate normal.
pub fn sample_covariates<R: Rng + ?Sized>(spec: &CovariateSpec, rng: &mut R) -> Result<Dataset> {
    let sampler = CovariateSampler::new(spec)?;
    let k = spec.k();
    let mut inputs = vec![0.0; spec.n * k];
    let mut scratch = vec![0.0; k];
    for row in inputs.chunks_exact_mut(k) {
        sampler.sample_into(rng, &mut scratch, row);
    }
    Dataset::from_flat(k, inputs, None)
}
