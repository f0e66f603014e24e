//! Experiment orchestration: JSON configs, multi-seed runs, aggregation,
//! stream ablations and learning-curve plots.

mod aggregate;
mod config;
mod curves;
mod run;

pub use aggregate::{
    aggregate, label_for, AggregateEntry, AggregateReport, ComparisonRow, ComparisonTable,
    SeedFailure, SeedMetric, SeedRow, Stat,
};
pub use config::{DataSource, ExperimentConfig, StreamSetting, SCHEMA_VERSION};
pub use curves::{emit_curves, panel_scales, render_curves, CurveStats, PanelScale, PANEL_HEIGHT, PANEL_WIDTH};
pub use run::{
    ablate, experiment_hash, prepare_data, reported_policies, run_experiment, seed_dir,
    seed_metrics, AblationOutcome, PreparedData,
};
