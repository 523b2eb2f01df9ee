//! Configuration, instance files and experiment orchestration for the
//! `fisher` command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod instance_io;

pub use config::{parse_config, serialize_config, Algorithm, Emit, ExperimentConfig, InstanceSource};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, run_seeds, ExperimentReport, RunRecord, RunStatus};
pub use instance_io::{load_instance, read_instance, serialize_instance, write_instance};
