//! Experiment sweeps, the over-the-air gradient descent demo and output
//! writers for the `dpma` command.

pub mod demo;
pub mod output;
pub mod runner;
pub mod spec;

pub use demo::{centralized_gd, distributed_demo, DemoProblem, DemoReport};
pub use output::{emit_csv, Manifest};
pub use runner::{run_experiment, DropRecord, ExperimentResult, Row};
pub use spec::{ExperimentKind, ExperimentSpec};
