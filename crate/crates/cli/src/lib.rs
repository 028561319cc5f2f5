//! Scenario-driven front end for `cubicavoid`: reads a JSON scenario, runs
//! an ivp, bvp, check or sweep, and writes CSV tables plus `report.json`.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, Mode, Scenario, ScenarioConfig};
pub use report::{RunReport, SweepReport};
pub use run::{execute, run_command, sweep, sweep_command, CliError, Flags, RunOutcome};
