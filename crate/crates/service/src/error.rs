use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Model(#[from] endogarble::Error),

    #[error("invalid service config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("service returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("malformed response from service: {0}")]
    Protocol(String),

    #[error("service expects K = {service}, attacker spec has K = {spec}")]
    DimensionMismatch { service: usize, spec: usize },
}
