//! Driver behind the `frbd` binary: strict config parsing, experiment
//! execution and deterministic CSV/report output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config_text, RunConfig, ValidationErrors, DEFAULT_SEED};
pub use output::{Report, Table};
pub use run::{execute, run, run_file, Failure};

/// Subcommands of the `frbd` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Velocity-driven friction element.
    Simulate,
    /// Force-driven mass below breakaway, one run per frequency.
    Presliding,
    /// Unidirectional oscillating velocity, one run per frequency.
    Lag,
    /// Observer-based tracking control of a 1-DOF arm.
    Arm,
    /// Parameter identification from a measured trace.
    Calibrate,
    /// Constant-velocity runs checked against the steady-state map.
    SteadySweep,
    /// Re-audit a trajectory CSV written by an earlier run.
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Presliding => "presliding",
            Self::Lag => "lag",
            Self::Arm => "arm",
            Self::Calibrate => "calibrate",
            Self::SteadySweep => "steady-sweep",
            Self::Audit => "audit",
        }
    }
}
