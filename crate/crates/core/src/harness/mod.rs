//! Experiment configuration, seeded runs, grid sweeps, metrics and result
//! files.

mod config;
mod metrics;
mod output;
mod run;
mod sweep;
mod verify;

pub use config::{ExperimentConfig, Features, InitParams, ProjectedParams, RewardKind};
pub use metrics::{estimate_rho, first_quartile_variance, last_quartile_variance, mse_tau, variance};
pub use output::{
    run_csv_name, write_long_format, write_run_csv, write_run_outputs, write_sweep_outputs, write_sweep_summary,
};
pub use run::{dataset_hash, run_experiment, run_seed, thread_pool, EvalPoint, RunRecord};
pub use sweep::{select_best, summarize, sweep, CellResult, CellSummary, SweepConfig, SweepGrid, SweepResult};
pub use verify::{ground_truth, iterate_occupancy, verify, Check, GroundTruthRow, Status};
