use std::fs::{self, File};
use std::io::{BufWriter, Write};

use egbo::benchmark::{regret, sample_gp_prior_function, standard_function, FunctionSpec, RegretTrace, TestFunction};
use egbo::engine::ChoiceSource;
use egbo::nsga2::ParetoFront;
use egbo::practitioner::select;
use egbo::rng::{derive_seed, stream_rng, Stream};
use egbo::{initial_design, Bounds, ChoiceSet, LoopState};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{runtime, CliError, RunArgs, OUTPUT_SCHEMA_VERSION};

/// File written by `egbo run`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Trace {
    pub schema_version: u32,
    pub function: FunctionSpec,
    pub function_name: String,
    pub behavior: String,
    pub seed: u64,
    pub true_max: f64,
    pub observations: Vec<f64>,
    pub regret: Option<RegretTrace>,
    /// The loop document: config, data and every choice set with its selection.
    pub loop_state: serde_json::Value,
}

fn build_function(args: &RunArgs) -> Result<TestFunction, CliError> {
    if args.function == "gp" {
        let gp = args.gp.settings();
        let bounds = Bounds::uniform(gp.lower, gp.upper, args.dim).map_err(|e| CliError::Usage(e.to_string()))?;
        let seed = derive_seed(args.loop_args.seed, Stream::TestFunction, 0);
        let mut f = sample_gp_prior_function(args.dim, gp.lengthscale, &bounds, seed).map_err(runtime)?;
        f.name = format!("gp{}d", args.dim);
        return Ok(f);
    }
    standard_function(&args.function, args.dim).map_err(|e| CliError::Usage(e.to_string()))
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn print_choices(set: &ChoiceSet) {
    for (i, c) in set.choices.iter().enumerate() {
        let tag = match c.source {
            ChoiceSource::UtilityOptimum => "x*",
            ChoiceSource::KneeAlternate => "knee",
            ChoiceSource::Fallback => "fallback",
        };
        println!(
            "  {i} {tag:<8} x={} utility={:.4} mean={:.4} std={:.4}",
            fmt_point(&c.point),
            c.utility,
            c.predicted_mean,
            c.predicted_std
        );
    }
}

fn front_line(iteration: usize, set: &ChoiceSet, front: Option<&ParetoFront>, dim: usize) -> serde_json::Value {
    let anchor = &set.choices[set.optimum_index()].point;
    let members: Vec<serde_json::Value> = front
        .map(|f| {
            (0..f.len())
                .map(|i| {
                    json!({
                        "decision": f.rows(i, dim),
                        "utility": f.objective_values[i][0],
                        "variability": f.objective_values[i][1],
                        "knee": i == f.knee_index,
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "iteration": iteration,
        "anchor": anchor,
        "members": members,
    })
}

pub fn execute(args: RunArgs) -> Result<(), CliError> {
    let func = build_function(&args)?;
    let cfg = args.loop_args.config();
    cfg.validate(&func.bounds).map_err(|e| CliError::Usage(e.to_string()))?;
    let behavior = args.behavior;

    let mut fronts = match &args.dump_fronts {
        Some(path) => Some(BufWriter::new(File::create(path).map_err(runtime)?)),
        None => None,
    };

    let points = initial_design(&cfg, &func.bounds);
    let values: Vec<f64> = points.iter().map(|x| func.evaluate(x)).collect();
    let mut observations = values.clone();
    let mut state = LoopState::from_initial(cfg.clone(), func.bounds.clone(), points, values).map_err(runtime)?;
    let mut rng = stream_rng(cfg.seed, Stream::Practitioner, 0);
    if !args.quiet {
        println!(
            "{} ({}D), behaviour {behavior}, budget {}, seed {}",
            func.name, func.dimension, cfg.max_evaluations, cfg.seed
        );
    }

    while !state.is_finished() {
        let iteration = state.history().len();
        let proposal = state.propose().map_err(runtime)?;
        let set = proposal.choices;
        if let Some(w) = fronts.as_mut() {
            let line = front_line(iteration, &set, proposal.front.as_ref(), func.dimension);
            writeln!(w, "{line}").map_err(runtime)?;
        }
        let truth: Vec<f64> = if behavior.needs_truth() {
            set.choices.iter().map(|c| func.evaluate(&c.point)).collect()
        } else {
            Vec::new()
        };
        let idx = select(&behavior, &set, &truth, &mut rng).map_err(runtime)?;
        let y = func.evaluate(&set.choices[idx].point);
        if !args.quiet {
            println!("iteration {iteration} (best so far {:.6})", state.incumbent().1);
            print_choices(&set);
            println!("  selected {idx}: y = {y:.6}");
        }
        state.apply_selection(&set, idx, y).map_err(runtime)?;
        observations.push(y);
    }
    if let Some(mut w) = fronts {
        w.flush().map_err(runtime)?;
    }

    let (best_x, best_y) = state.incumbent();
    let f_star = func.true_max.max(best_y);
    let trace_regret = regret(&observations, f_star).ok();
    if !args.quiet {
        println!("best y = {best_y:.6} at x = {}", fmt_point(best_x));
        if let Some(r) = &trace_regret {
            println!("simple regret {:.6}, average regret {:.6}", r.simple_at(r.len()), r.average_at(r.len()));
        }
    }

    let trace = Trace {
        schema_version: OUTPUT_SCHEMA_VERSION,
        function: func.spec.clone(),
        function_name: func.name.clone(),
        behavior: behavior.to_string(),
        seed: cfg.seed,
        true_max: func.true_max,
        observations,
        regret: trace_regret,
        loop_state: serde_json::from_str(&state.to_json().map_err(runtime)?).map_err(runtime)?,
    };
    let text = serde_json::to_string_pretty(&trace).map_err(runtime)?;
    fs::write(&args.out, text).map_err(runtime)?;
    if !args.quiet {
        println!("wrote {}", args.out.display());
    }
    Ok(())
}
