//! Experiment harness: configuration, the Monte Carlo engine, analytic
//! oracles, slope estimation and CSV output.

pub mod analytic;
pub mod config;
pub mod csv;
pub mod engine;
pub mod slope;

pub use config::{DfePivots, Direction, ScenarioConfig};
pub use csv::{emit_csv, parse_csv, CurvePoint};
pub use engine::{metric_names, run_scenario, run_scenario_with_threads};
pub use slope::diversity_slope;
