use std::fs;

use egbo::benchmark::{build_suite, run_experiment_grid, ExperimentGrid};

use crate::{runtime, BenchArgs, CliError};

fn core_error(e: egbo::Error) -> CliError {
    match e {
        egbo::Error::Input(m) => CliError::Usage(m),
        other => runtime(other),
    }
}

pub fn execute(args: BenchArgs) -> Result<(), CliError> {
    let count = args.count.unwrap_or(if args.full { 50 } else { 10 });
    let repeats = args.repeats.unwrap_or(if args.full { 16 } else { 4 });
    if args.behaviors.is_empty() {
        return Err(CliError::Usage("at least one behaviour is required".into()));
    }
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }

    let mut functions = Vec::new();
    for suite in &args.suite {
        functions.extend(build_suite(suite, count, args.gp.settings(), args.loop_args.seed, args.full).map_err(core_error)?);
    }
    let loop_config = args.loop_args.config();
    for f in &functions {
        loop_config.validate(&f.bounds).map_err(core_error)?;
    }
    let grid = ExperimentGrid {
        functions,
        behaviors: args.behaviors.clone(),
        repeats,
        loop_config,
        master_seed: args.loop_args.seed,
    };
    let cells = grid.functions.len() * grid.behaviors.len() * repeats;
    eprintln!("running {cells} cells on {jobs} threads");
    let results = run_experiment_grid(&grid, jobs).map_err(core_error)?;

    fs::create_dir_all(&args.out).map_err(runtime)?;
    fs::write(args.out.join("results.csv"), results.to_csv().map_err(runtime)?).map_err(runtime)?;
    fs::write(args.out.join("results.json"), results.to_json().map_err(runtime)?).map_err(runtime)?;
    let plot = serde_json::to_string_pretty(&results.plot_data()).map_err(runtime)?;
    fs::write(args.out.join("plot.json"), plot).map_err(runtime)?;

    let budget = grid.loop_config.max_evaluations;
    let mid = budget.min(10);
    println!(
        "{:<14} {:>6} {:>14} {:>14} {:>14}",
        "behavior",
        "runs",
        format!("simple@{mid}"),
        format!("simple@{budget}"),
        format!("average@{budget}")
    );
    for b in &grid.behaviors {
        let name = b.to_string();
        if let (Some(m), Some(f)) = (results.aggregate_at(&name, mid), results.aggregate_at(&name, budget)) {
            println!(
                "{name:<14} {:>6} {:>14.4} {:>14.4} {:>14.4}",
                f.runs, m.mean_simple, f.mean_simple, f.mean_average
            );
        }
    }
    println!("wrote {}", args.out.display());

    let failed = results.failed_cells().count();
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} of {cells} cells failed; details in results.json"
        )));
    }
    Ok(())
}
