//! Closed-loop simulation, scenario configuration, metrics and sweeps.

pub mod averaging;
pub mod config;
pub mod metrics;
pub mod noise;
pub mod run;
pub mod sweep;
pub mod trajectory;

pub use config::Scenario;
pub use metrics::{compute_metrics, Metrics};
pub use noise::{NoiseSource, NoiseSpec};
pub use run::{channel_names, run_scenario, run_scenario_with, RunOptions};
pub use sweep::{run_sweep, summary_csv, SweepRun};
pub use trajectory::Trajectory;
