//! Run configuration, Monte Carlo driver, metrics and persistence.

pub mod config;
pub mod io;
pub mod metrics;
pub mod montecarlo;

pub use config::{EstimatorKind, EstimatorSettings, RunConfig, Task};
pub use metrics::{block_metrics, metrics, sign_error, Block, BlockMetrics, MetricsRow};
pub use montecarlo::{run_monte_carlo, MonteCarloReport, ReplicationEstimate};
