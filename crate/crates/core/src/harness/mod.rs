//! Experiment driver: config handling, the gen/train/test/render/report
//! pipeline and its command-line front end.

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod svg;

pub use config::ExperimentConfig;
pub use pipeline::{cmd_gen, cmd_render, cmd_report, cmd_test, cmd_train};
