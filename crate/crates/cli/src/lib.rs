//! Command-line front end for `livsic-core`: configuration, observable specs,
//! the analysis pipelines behind each subcommand and the report writer.

pub mod config;
pub mod observable_spec;
pub mod report;
pub mod run;
pub mod scenarios;
pub mod seeds;

pub use config::AnalysisConfig;
pub use report::{canonical, RunReport};
pub use run::{run, Command, Session};
pub use scenarios::{run_scenario, Scenario};
