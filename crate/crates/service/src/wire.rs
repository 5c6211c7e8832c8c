//! JSON bodies for the prediction endpoint.
//!
//! Numbers are written with 17 significant digits so every f64 survives
//! the round trip unchanged.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PredictRequest {
    pub inputs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PredictResponse {
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub k: usize,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Appends `v` with 17 significant digits.
pub fn write_number(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

fn write_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_number(out, *v);
    }
    out.push(']');
}

/// `{"inputs": [[...], ...]}` for a row-major buffer of width `k`.
pub fn encode_request(inputs: &[f64], k: usize) -> String {
    let mut out = String::with_capacity(inputs.len() * 26 + 16);
    out.push_str("{\"inputs\":[");
    for (i, row) in inputs.chunks_exact(k).enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_array(&mut out, row);
    }
    out.push_str("]}");
    out
}

/// `{"outputs": [...]}`.
pub fn encode_response(outputs: &[f64]) -> String {
    let mut out = String::with_capacity(outputs.len() * 26 + 16);
    out.push_str("{\"outputs\":");
    write_array(&mut out, outputs);
    out.push('}');
    out
}
