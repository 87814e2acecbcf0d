//! Experiment grids: functions × behaviours × repeats, with regret aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functions::{sample_gp_prior_function, standard_function, FunctionSpec, TestFunction};
use super::regret::{regret, RegretTrace};
use crate::data::Bounds;
use crate::engine::{run_loop, ChoiceSet, LoopConfig};
use crate::error::{input, Result};
use crate::practitioner::{select, Behavior};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Version tag of every file the benchmark writes.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// Lengthscale and box for sampled GP functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpSuiteSettings {
    pub lengthscale: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for GpSuiteSettings {
    fn default() -> Self {
        Self {
            lengthscale: 0.3,
            lower: 0.0,
            upper: 10.0,
        }
    }
}

impl GpSuiteSettings {
    /// Unit box with lengthscale 0.04.
    pub fn unit_box() -> Self {
        Self {
            lengthscale: 0.04,
            lower: 0.0,
            upper: 1.0,
        }
    }
}

/// Builds a named suite of test functions.
///
/// `Nd-gp` samples `count` GP-prior functions in N dimensions; `standard`
/// is the Ackley/Griewank/Rastrigin/Rosenbrock/Powell set (10D members only
/// with `full`).
pub fn build_suite(
    name: &str,
    count: usize,
    gp: GpSuiteSettings,
    master_seed: u64,
    full: bool,
) -> Result<Vec<TestFunction>> {
    if name == "standard" {
        let mut list = vec![
            ("ackley", 2),
            ("ackley", 5),
            ("griewank", 2),
            ("griewank", 5),
            ("rastrigin", 2),
            ("rastrigin", 5),
            ("rosenbrock", 2),
            ("rosenbrock", 5),
            ("powell", 5),
        ];
        if full {
            list.extend([("ackley", 10), ("griewank", 10)]);
        }
        return list
            .into_iter()
            .map(|(n, d)| standard_function(n, d))
            .collect();
    }
    let dim: usize = name
        .strip_suffix("d-gp")
        .and_then(|d| d.parse().ok())
        .filter(|d| *d >= 1)
        .ok_or_else(|| input(format!("unknown suite {name:?} (expected <N>d-gp or standard)")))?;
    let bounds = Bounds::uniform(gp.lower, gp.upper, dim)?;
    let functions: Vec<Result<TestFunction>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, Stream::TestFunction, (dim as u64) << 32 | i);
            sample_gp_prior_function(dim, gp.lengthscale, &bounds, seed).map(|mut f| {
                f.name = format!("gp{dim}d-{i:02}");
                f
            })
        })
        .collect();
    functions.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub functions: Vec<TestFunction>,
    pub behaviors: Vec<Behavior>,
    pub repeats: usize,
    pub loop_config: LoopConfig,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub function: String,
    pub dimension: usize,
    pub behavior: String,
    pub repeat: usize,
    /// Loop seed; shared by all behaviours for the same function and repeat.
    pub seed: u64,
    pub status: CellStatus,
    pub observations: Vec<f64>,
    pub trace: Option<RegretTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub behavior: String,
    /// Number of evaluations so far (1-based).
    pub iteration: usize,
    pub runs: usize,
    pub mean_simple: f64,
    pub std_simple: f64,
    pub mean_average: f64,
    pub std_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEcho {
    pub functions: Vec<FunctionSpec>,
    pub function_names: Vec<String>,
    pub behaviors: Vec<String>,
    pub repeats: usize,
    pub loop_config: LoopConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    pub schema_version: u32,
    pub master_seed: u64,
    pub config: GridEcho,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub iteration: Vec<usize>,
    pub simple_mean: Vec<f64>,
    pub simple_std: Vec<f64>,
    pub average_mean: Vec<f64>,
    pub average_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub schema_version: u32,
    pub series: BTreeMap<String, PlotSeries>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and standard deviation of both regrets per behaviour per iteration,
/// over every successful cell. Behaviours keep the order given.
pub fn aggregate(cells: &[CellResult], behaviors: &[String]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for b in behaviors {
        let traces: Vec<&RegretTrace> = cells
            .iter()
            .filter(|c| &c.behavior == b && c.status == CellStatus::Ok)
            .filter_map(|c| c.trace.as_ref())
            .collect();
        let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
        for t in 1..=len {
            let simple: Vec<f64> = traces.iter().map(|tr| tr.simple_at(t)).collect();
            let average: Vec<f64> = traces.iter().map(|tr| tr.average_at(t)).collect();
            let (ms, ss) = mean_std(&simple);
            let (ma, sa) = mean_std(&average);
            rows.push(AggregateRow {
                behavior: b.clone(),
                iteration: t,
                runs: traces.len(),
                mean_simple: ms,
                std_simple: ss,
                mean_average: ma,
                std_average: sa,
            });
        }
    }
    rows
}

fn run_cell(grid: &ExperimentGrid, fi: usize, bi: usize, repeat: usize) -> CellResult {
    let func = &grid.functions[fi];
    let behavior = grid.behaviors[bi];
    let cell_index = ((fi * grid.behaviors.len() + bi) * grid.repeats + repeat) as u64;
    let loop_seed = derive_seed(grid.master_seed, Stream::InitialDesign, (fi as u64) << 32 | repeat as u64);
    let cfg = LoopConfig {
        seed: loop_seed,
        ..grid.loop_config.clone()
    };
    let mut rng = stream_rng(grid.master_seed, Stream::Practitioner, cell_index);
    let mut selector = |choices: &ChoiceSet| {
        let truth: Vec<f64> = if behavior.needs_truth() {
            choices.choices.iter().map(|c| func.evaluate(&c.point)).collect()
        } else {
            Vec::new()
        };
        select(&behavior, choices, &truth, &mut rng).map_err(|e| e.to_string())
    };
    let outcome = run_loop(|x| func.evaluate(x), &mut selector, &cfg, &func.bounds);
    let observations = outcome.observations;
    let best_seen = observations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f_star = func.true_max.max(best_seen);
    let (status, trace) = match outcome.error {
        None => match regret(&observations, f_star) {
            Ok(t) => (CellStatus::Ok, Some(t)),
            Err(e) => (
                CellStatus::Failed {
                    message: e.to_string(),
                },
                None,
            ),
        },
        Some(e) => (
            CellStatus::Failed {
                message: e.to_string(),
            },
            None,
        ),
    };
    if let CellStatus::Failed { message } = &status {
        log::warn!("cell {} / {behavior} / {repeat} failed: {message}", func.name);
    }
    CellResult {
        function: func.name.clone(),
        dimension: func.dimension,
        behavior: behavior.to_string(),
        repeat,
        seed: loop_seed,
        status,
        observations,
        trace,
    }
}

/// Runs every (function, behaviour, repeat) cell on `jobs` threads.
///
/// All behaviours share the initial design for a given function and repeat;
/// each cell draws practitioner randomness from its own stream. Output order
/// is independent of scheduling.
pub fn run_experiment_grid(grid: &ExperimentGrid, jobs: usize) -> Result<GridResults> {
    if grid.repeats == 0 {
        return Err(input("repeats must be >= 1"));
    }
    if grid.functions.is_empty() || grid.behaviors.is_empty() {
        return Err(input("grid needs at least one function and one behaviour"));
    }
    for f in &grid.functions {
        grid.loop_config.validate(&f.bounds)?;
    }
    let mut keys = Vec::new();
    for fi in 0..grid.functions.len() {
        for bi in 0..grid.behaviors.len() {
            for r in 0..grid.repeats {
                keys.push((fi, bi, r));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| input(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        keys.par_iter()
            .map(|&(fi, bi, r)| run_cell(grid, fi, bi, r))
            .collect()
    });
    let behaviors: Vec<String> = grid.behaviors.iter().map(Behavior::to_string).collect();
    let aggregates = aggregate(&cells, &behaviors);
    Ok(GridResults {
        schema_version: RESULTS_SCHEMA_VERSION,
        master_seed: grid.master_seed,
        config: GridEcho {
            functions: grid.functions.iter().map(|f| f.spec.clone()).collect(),
            function_names: grid.functions.iter().map(|f| f.name.clone()).collect(),
            behaviors,
            repeats: grid.repeats,
            loop_config: grid.loop_config.clone(),
        },
        cells,
        aggregates,
    })
}

impl GridResults {
    /// One row per (cell, iteration):
    /// `schema_version,function,dimension,behavior,seed,iteration,simple_regret,average_regret`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| input(format!("csv: {e}"));
        w.write_record([
            "schema_version",
            "function",
            "dimension",
            "behavior",
            "seed",
            "iteration",
            "simple_regret",
            "average_regret",
        ])
        .map_err(err)?;
        for c in &self.cells {
            if let Some(t) = &c.trace {
                for i in 0..t.len() {
                    w.write_record([
                        RESULTS_SCHEMA_VERSION.to_string(),
                        c.function.clone(),
                        c.dimension.to_string(),
                        c.behavior.clone(),
                        c.seed.to_string(),
                        (i + 1).to_string(),
                        t.simple_regret[i].to_string(),
                        t.average_regret[i].to_string(),
                    ])
                    .map_err(err)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| input(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| input(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| input(e.to_string()))
    }

    /// Mean ± std series per behaviour for external plotting.
    pub fn plot_data(&self) -> PlotData {
        let mut series: BTreeMap<String, PlotSeries> = BTreeMap::new();
        for row in &self.aggregates {
            let s = series.entry(row.behavior.clone()).or_insert_with(|| PlotSeries {
                iteration: Vec::new(),
                simple_mean: Vec::new(),
                simple_std: Vec::new(),
                average_mean: Vec::new(),
                average_std: Vec::new(),
            });
            s.iteration.push(row.iteration);
            s.simple_mean.push(row.mean_simple);
            s.simple_std.push(row.std_simple);
            s.average_mean.push(row.mean_average);
            s.average_std.push(row.std_average);
        }
        PlotData {
            schema_version: RESULTS_SCHEMA_VERSION,
            series,
        }
    }

    /// Aggregate row for `behavior` after `iteration` evaluations.
    pub fn aggregate_at(&self, behavior: &str, iteration: usize) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|r| r.behavior == behavior && r.iteration == iteration)
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.status != CellStatus::Ok)
    }
}
