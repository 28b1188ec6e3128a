//! Library half of the `regdual` command-line tool.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;

pub use config::{Command, InstanceSource, ObjectiveKind, ObjectiveSpec, Perturbation, RunConfig, SweepSpec};
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_PASS};
pub use run::{run, Outcome};
pub use sweep::{emit_plot_data, return_range, robustness_sweep, SweepRecord, TrainedOn};
