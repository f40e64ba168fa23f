//! Experiment plumbing for the `hess-soc` binary: spec resolution, the
//! subcommands, and the files they write.

pub mod artifact;
pub mod cmd;
pub mod error;
pub mod spec;

pub use cmd::compare::{ComparisonRow, ComparisonTable, DeviceRun};
pub use error::{CliError, CliResult};
pub use spec::{Experiment, ExperimentSpec};
