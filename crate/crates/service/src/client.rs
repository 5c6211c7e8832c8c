//! The attacker: queries a service, fits a model to the answers and,
//! given the garbling scales, runs the recovery attack.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use endogarble::estimators::recovery_candidates;
use endogarble::{
    logit_fit, ols_fit, recover_beta_known_lambda, recover_beta_known_lambda_pair, rng, sample_covariates,
    CovariateSpec, Dataset, FitResult,
};

use crate::error::ServiceError;
use crate::wire::{encode_request, ErrorBody, InfoResponse, PredictResponse};

const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Least squares on the raw outputs.
    Ols,
    /// Least squares on the log-odds of probability outputs.
    Logit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StealRequest {
    /// Base URL of the service, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    /// Covariate distribution; `spec.n` is ignored in favor of `n`.
    pub spec: CovariateSpec,
    pub n: usize,
    pub estimator: Estimator,
    pub known_lambda: Option<f64>,
    pub known_output_lambda: Option<f64>,
    pub seed: u64,
    /// Rows per request; 1 issues sequential single-row queries.
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealReport {
    pub k: usize,
    pub link: String,
    pub n: usize,
    pub requests: usize,
    pub fit: FitResult,
    pub recovered_beta: Option<f64>,
    /// Both square-root branches of the recovery, when it ran.
    pub candidates: Option<(f64, f64)>,
}

/// An unprocessed HTTP response.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

/// Blocking HTTP client for one service.
pub struct ServiceClient {
    base: String,
    http: reqwest::blocking::Client,
}

impl ServiceClient {
    pub fn new(endpoint: &str) -> Result<Self, ServiceError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ServiceError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(ServiceClient {
            base: endpoint.trim_end_matches('/').to_string(),
            http,
        })
    }

    fn send(&self, build: impl Fn() -> reqwest::blocking::RequestBuilder) -> Result<(u16, String), ServiceError> {
        let mut last = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            match build().send().and_then(|r| {
                let status = r.status().as_u16();
                r.text().map(|t| (status, t))
            }) {
                Ok(ok) => return Ok(ok),
                Err(e) => {
                    last = e.to_string();
                    if attempt < MAX_ATTEMPTS {
                        std::thread::sleep(Duration::from_millis(100 * u64::from(attempt)));
                    }
                }
            }
        }
        Err(ServiceError::Transport {
            attempts: MAX_ATTEMPTS,
            message: last,
        })
    }

    fn check_status(status: u16, body: String) -> Result<String, ServiceError> {
        if status == 200 {
            Ok(body)
        } else {
            let body = serde_json::from_str::<ErrorBody>(&body)
                .map(|e| e.error)
                .unwrap_or(body);
            Err(ServiceError::Http { status, body })
        }
    }

    /// Posts an arbitrary body to `/v1/predict` once, without retries or
    /// status checks. Useful for probing how the service handles bad input.
    pub fn raw_predict(&self, body: &str) -> Result<RawResponse, ServiceError> {
        let url = format!("{}/v1/predict", self.base);
        self.raw(
            self.http
                .post(url)
                .header("content-type", "application/json")
                .body(body.to_string()),
        )
    }

    /// GET on any path under the base URL, without retries or status checks.
    pub fn raw_get(&self, path: &str) -> Result<RawResponse, ServiceError> {
        self.raw(self.http.get(format!("{}{path}", self.base)))
    }

    fn raw(&self, request: reqwest::blocking::RequestBuilder) -> Result<RawResponse, ServiceError> {
        let resp = request.send().map_err(|e| ServiceError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .map(|(k, v)| (k.to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect();
        let body = resp.text().map_err(|e| ServiceError::Protocol(e.to_string()))?;
        Ok(RawResponse { status, headers, body })
    }

    pub fn info(&self) -> Result<InfoResponse, ServiceError> {
        let url = format!("{}/v1/info", self.base);
        let (status, body) = self.send(|| self.http.get(&url))?;
        let body = Self::check_status(status, body)?;
        serde_json::from_str(&body).map_err(|e| ServiceError::Protocol(e.to_string()))
    }

    /// Sends a row-major batch of width `k`.
    pub fn predict(&self, inputs: &[f64], k: usize) -> Result<Vec<f64>, ServiceError> {
        let url = format!("{}/v1/predict", self.base);
        let body = encode_request(inputs, k);
        let (status, text) = self.send(|| {
            self.http
                .post(&url)
                .header("content-type", "application/json")
                .body(body.clone())
        })?;
        let text = Self::check_status(status, text)?;
        let resp: PredictResponse = serde_json::from_str(&text).map_err(|e| ServiceError::Protocol(e.to_string()))?;
        if resp.outputs.len() * k != inputs.len() {
            return Err(ServiceError::Protocol(format!(
                "{} outputs for {} rows",
                resp.outputs.len(),
                inputs.len() / k
            )));
        }
        Ok(resp.outputs)
    }
}

/// Queries `n` rows drawn from `spec` (seeded by `seed`), fits the chosen
/// estimator, and runs the recovery attack when `known_lambda` is given.
pub fn steal(req: &StealRequest) -> Result<StealReport, ServiceError> {
    if req.batch == 0 {
        return Err(ServiceError::Config("batch must be positive".to_string()));
    }
    let client = ServiceClient::new(&req.endpoint)?;
    let info = client.info()?;
    if info.k != req.spec.k() {
        return Err(ServiceError::DimensionMismatch {
            service: info.k,
            spec: req.spec.k(),
        });
    }
    let k = info.k;
    let spec = CovariateSpec {
        n: req.n,
        ..req.spec.clone()
    };
    let queries = sample_covariates(&spec, &mut rng::seeded(req.seed))?;

    let mut outputs = Vec::with_capacity(req.n);
    let mut requests = 0;
    for chunk in queries.inputs().chunks(req.batch * k) {
        outputs.extend(client.predict(chunk, k)?);
        requests += 1;
    }
    let data = Dataset::from_flat(k, queries.inputs().to_vec(), Some(outputs))?;
    let fit = match req.estimator {
        Estimator::Ols => ols_fit(&data, true)?,
        Estimator::Logit => logit_fit(&data)?,
    };

    let (recovered_beta, candidates) = match req.known_lambda {
        Some(lambda) => {
            let output_lambda = req.known_output_lambda.unwrap_or(0.0);
            let recovered = match req.known_output_lambda {
                Some(l2) => recover_beta_known_lambda_pair(&fit, lambda, l2)?,
                None => recover_beta_known_lambda(&fit, lambda)?,
            };
            (Some(recovered), Some(recovery_candidates(&fit, lambda, output_lambda)?))
        }
        None => (None, None),
    };

    Ok(StealReport {
        k,
        link: info.link,
        n: req.n,
        requests,
        fit,
        recovered_beta,
        candidates,
    })
}
