//! Network loop for garbling experiments: the defended model as an HTTP
//! prediction service, and the model-stealing attacker as its client.

pub mod client;
pub mod config;
pub mod error;
pub mod server;
pub mod wire;

pub use client::{steal, Estimator, RawResponse, ServiceClient, StealReport, StealRequest};
pub use config::ServiceConfig;
pub use error::ServiceError;
pub use server::{router, serve, ServiceHandle};
