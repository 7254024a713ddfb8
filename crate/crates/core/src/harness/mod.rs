//! Experiment orchestration: configuration, seeded disorder sweeps with
//! resumable persistence, border studies and file output.

pub mod border;
pub mod config;
pub mod output;
pub mod sweep;

pub use border::{run_border_study, run_border_study_with, BorderRow, BorderStudy};
pub use config::{CouplingRule, EpsGrid, ExperimentConfig, Regime, Statistic};
pub use output::{emit_outputs, Artifact};
pub use sweep::{run_sweep, run_sweep_with, Estimate, PointResult, RunOptions, RunRecord};
