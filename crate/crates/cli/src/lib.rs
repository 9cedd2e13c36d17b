//! Experiment harness on top of `kfp-core`: configuration, the three
//! headline studies (diffusion-limit convergence, weak-formulation
//! residual, chord integrability) and report/output plumbing.

// Guards are written `!(x > 0)` rather than `x <= 0` so that NaN inputs
// fail them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod report;
pub mod studies;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] kfp_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
