//! Benchmark harness: test functions, regret metrics and experiment grids.

mod functions;
mod grid;
mod regret;

pub use functions::{
    estimate_true_max, from_spec, sample_gp_prior_function, sample_gp_prior_function_with,
    standard_function, AnchorSet, FunctionSpec, TestFunction, DEFAULT_ANCHORS,
    DEFAULT_PROBE_BUDGET, STANDARD_FUNCTIONS,
};
pub use grid::{
    aggregate, build_suite, run_experiment_grid, AggregateRow, CellResult, CellStatus,
    ExperimentGrid, GpSuiteSettings, GridEcho, GridResults, PlotData, PlotSeries,
    RESULTS_SCHEMA_VERSION,
};
pub use regret::{regret, RegretTrace, OPTIMUM_SLACK};
