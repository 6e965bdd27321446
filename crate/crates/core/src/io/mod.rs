//! Configuration, CSV output and experiment runners.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{load_config, parse_config, Experiment, SimConfig};
pub use output::{read_table, Manifest, Table};
pub use runner::{run_experiment, RunOptions, RunReport};
