//! Scenario files, the simulation driver and report encoding behind `esr-sim`.

pub mod config;
pub mod random;
pub mod report;
mod run;
pub mod selftest;

use thiserror::Error;

pub use config::{ConfigError, ScenarioConfig, ScenarioType};
pub use report::{OutputFormat, Record, RunReport};
pub use run::{run_scenario, RunOverrides};
pub use selftest::{run_self_test, SelfTestOptions, SelfTestReport};

use crate::EsrError;

/// Process exit status for a bad configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit status for a failed computation, I/O or self-test.
pub const EXIT_COMPUTATION: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Computation(#[from] EsrError),
    #[error("self-test failed: {0}")]
    SelfTest(String),
    #[error("output error: {0}")]
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Computation(_) | RunError::SelfTest(_) | RunError::Output(_) => EXIT_COMPUTATION,
        }
    }
}
