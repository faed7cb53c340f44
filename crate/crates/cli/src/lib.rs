//! Configuration, subcommands and artifact emission for the `tubeflow` binary.

pub mod commands;
pub mod config;
pub mod grid;

pub use commands::{
    catalog_csv, cmd_bounds, cmd_cmc_search, cmd_refine, cmd_run, cmd_sweep, exit_code, format_refine,
    refine_table, sweep_exit_code, RefineTable, RunOutput, Summary, SweepRow,
};
pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use grid::GridSpec;
