//! Pipeline stages shared by the `ogtt` binary and the acceptance suite.

pub mod config;
pub mod outputs;
pub mod pipeline;
pub mod plot;

pub use config::RunConfig;
pub use pipeline::{classify_command, fit_command, report_command, run_all, synth_command};
