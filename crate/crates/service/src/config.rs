use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;

use serde::{Deserialize, Serialize};

use endogarble::{GarblingConfig, RegressionModel};

use crate::error::ServiceError;

pub const DEFAULT_MAX_BATCH: usize = 10_000;

fn default_max_batch() -> usize {
    DEFAULT_MAX_BATCH
}

/// Configuration of the defended service. The JSON form is
/// `{"model": ..., "garbling": ..., "bind": "host:port", "seed": int}`
/// with an optional `"max_batch"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub model: RegressionModel,
    pub garbling: GarblingConfig,
    #[serde(rename = "bind")]
    pub bind_address: String,
    pub seed: u64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
}

impl ServiceConfig {
    pub fn new(model: RegressionModel, garbling: GarblingConfig, bind_address: impl Into<String>, seed: u64) -> Self {
        ServiceConfig {
            model,
            garbling,
            bind_address: bind_address.into(),
            seed,
            max_batch: DEFAULT_MAX_BATCH,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let cfg: ServiceConfig = serde_json::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.model.validate()?;
        self.garbling.validate_for(&self.model)?;
        if self.max_batch == 0 {
            return Err(ServiceError::Config("max_batch must be positive".to_string()));
        }
        self.socket_addr().map(|_| ())
    }

    pub fn socket_addr(&self) -> Result<SocketAddr, ServiceError> {
        self.bind_address
            .to_socket_addrs()
            .ok()
            .and_then(|mut it| it.next())
            .ok_or_else(|| ServiceError::Config(format!("cannot parse bind address `{}`", self.bind_address)))
    }
}
