//! Front end of the `muskat-lab` binary: configuration, the four commands,
//! and the writers for their outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{
    cmd_simulate, cmd_sweep, cmd_verify, cmd_weights, load_baselines, VerifyOptions, WeightTable,
};
pub use config::{parse_config, RunConfig};
pub use error::HarnessError;
