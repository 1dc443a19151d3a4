//! Experiment harness: scenario files, seeded runs, metrics and CSV output.

pub mod config;
pub mod eval;
pub mod metrics;
pub mod stats;
pub mod sweep;

pub use config::{ScenarioConfig, Scheme};
pub use eval::{evaluate, run_eval, run_scheme, train_scheme, EvalStats, Policy};
pub use metrics::{jain_index, summarize, write_csv, write_summary_csv, MetricsRow, CSV_HEADER};
pub use sweep::{run_point, sweep, sweep_aout, sweep_users, SweepParam, SweepReport};
