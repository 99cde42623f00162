//! Config-driven experiment runner for the `zforce` simulator.
//!
//! A run reads one TOML config, resolves it into simulator inputs, and
//! writes a CSV table plus a manifest holding the resolved config.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod units;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(zforce::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// A simulator error raised while checking inputs.
    pub fn from_validation(e: zforce::Error) -> Self {
        CliError::Validation(e.to_string())
    }

    /// A simulator error raised during a run. Parameter problems found only
    /// at run time still count as validation failures.
    pub fn from_run(e: zforce::Error) -> Self {
        use zforce::Error as E;
        match e.root() {
            E::InvalidParameter { .. } | E::InvalidLayout(_) | E::UnsupportedModel { .. } | E::BesselDomain(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
