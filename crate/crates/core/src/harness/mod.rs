//! Monte Carlo benchmarks and the epidemic case-study pipeline.

mod bench;
mod case;
mod estimator;

pub use bench::{
    run_scenario, run_scenario_with, scenario_by_name, scenario_catalog, BenchResult, DataMode, EstimatorResult,
    Scenario,
};
pub use case::{
    default_case_estimators, early_detection_report, load_case_series, parse_case_series, CaseSeries, DetectionCell,
    DetectionReport, DetectionRow, ExtinctionFamily, Wave, DEFAULT_DATE_FORMAT, FIXTURE_CSV,
};
pub use estimator::{EstimatorConfig, EstimatorOutcome, KChoice};
