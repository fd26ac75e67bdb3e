//! Configuration, Monte Carlo runs and CSV output.

pub mod config;
pub mod csv;
pub mod runner;

pub use config::{
    dbm_to_watts, load_config, parse_config, BudgetConfig, ExperimentConfig, FlConfig, LayoutConfig, LayoutKind,
    PartitionKind, SweepConfig, SweepKey,
};
pub use csv::{read_csv, read_rows, write_csv, write_rows, COLUMNS};
pub use runner::{
    run_experiment, run_trial, summarize, theorem_instance, theorem_sweep, ResultRow, SummaryRow, TheoremInstance,
};
