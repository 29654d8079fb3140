//! Scenario files, sweep and falsification drivers, and the JSON/CSV reports
//! they produce.

mod cli;
mod report;
mod run;
mod scenario;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{BoundEntry, BoundStatus, Falsification, FalsifyVerdict, Report, Row, Violation, CSV_FIXED_COLUMNS};
pub use cli::{cli_main, Format, EXIT_INPUT, EXIT_OK, EXIT_VIOLATION};
pub use run::{run_falsify, run_sweep};
pub use scenario::{parse_scenarios, ParamRange, Ranges, Scenario, XPolicy};

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Stage {
    Scenario,
    Parse,
    Instance,
    Evaluate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Scenario => "scenario",
            Stage::Parse => "parse",
            Stage::Instance => "instance",
            Stage::Evaluate => "evaluate",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{stage} stage failed: {message}")]
pub struct HarnessError {
    pub stage: Stage,
    pub message: String,
}

impl HarnessError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        HarnessError {
            stage,
            message: message.to_string(),
        }
    }
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
