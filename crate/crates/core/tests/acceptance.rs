//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use egbo::acquisition::{batch_utility, ucb, variability, UtilityConfig, VARIABILITY_SENTINEL};
use egbo::benchmark::{build_suite, run_experiment_grid, ExperimentGrid, GpSuiteSettings, GridResults};
use egbo::engine::{ChoiceSource, DISTINCT_TOLERANCE};
use egbo::gp::log_marginal_likelihood;
use egbo::nsga2::{hypervolume_2d, knee_point, non_dominated_sort, nsga2, MooProblem, Nsga2Config};
use egbo::{initial_design, Behavior, Bounds, Dataset, GpHyperparams, GpModel, LoopConfig, LoopState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DESK_SEED: u64 = 7;
const DESK_BEHAVIORS: [&str; 5] = ["expert", "trusting", "adversarial", "pbest:0.5", "pbest:0.25"];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn desk() -> &'static GridResults {
    static RESULTS: OnceLock<GridResults> = OnceLock::new();
    RESULTS.get_or_init(|| {
        let started = Instant::now();
        let functions = build_suite("1d-gp", 10, GpSuiteSettings::default(), DESK_SEED, false).unwrap();
        let grid = ExperimentGrid {
            functions,
            behaviors: DESK_BEHAVIORS.iter().map(|b| b.parse().unwrap()).collect(),
            repeats: 4,
            loop_config: LoopConfig {
                p: 4,
                max_evaluations: 20,
                ..LoopConfig::default()
            },
            master_seed: DESK_SEED,
        };
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        let results = run_experiment_grid(&grid, jobs).unwrap();
        eprintln!("desk suite: {} cells in {:.0?}", results.cells.len(), started.elapsed());
        results
    })
}

fn simple(behavior: &str, t: usize) -> f64 {
    desk().aggregate_at(behavior, t).unwrap().mean_simple
}

fn average(behavior: &str, t: usize) -> f64 {
    desk().aggregate_at(behavior, t).unwrap().mean_average
}

fn regret_ordering() -> Outcome {
    if desk().failed_cells().count() > 0 {
        return Err(format!("{} cells failed", desk().failed_cells().count()));
    }
    let (e, t, a) = (simple("expert", 10), simple("trusting", 10), simple("adversarial", 10));
    let detail = format!("simple regret @10: expert {e:.4}, trusting {t:.4}, adversarial {a:.4}");
    if e < t && t <= a {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_selector_recovery() -> Outcome {
    let (q, t) = (simple("pbest:0.25", 20), simple("trusting", 20));
    let rel = (q - t).abs() / t;
    let detail = format!("final simple regret pbest:0.25 {q:.4} vs trusting {t:.4} (relative gap {rel:.3})");
    if rel <= 0.25 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn average_regret_convergence() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for b in DESK_BEHAVIORS {
        let (a5, a20) = (average(b, 5), average(b, 20));
        ok &= a20 < a5;
        parts.push(format!("{b} {a5:.3}->{a20:.3}"));
    }
    let detail = format!("average regret @5->@20: {}", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn expert_beats_adversarial() -> Outcome {
    let cells = &desk().cells;
    let mut wins = 0;
    let mut pairs = 0;
    for e in cells.iter().filter(|c| c.behavior == "expert") {
        let a = cells
            .iter()
            .find(|c| c.behavior == "adversarial" && c.function == e.function && c.repeat == e.repeat)
            .unwrap();
        let (te, ta) = (e.trace.as_ref().unwrap(), a.trace.as_ref().unwrap());
        pairs += 1;
        if te.simple_at(te.len()) <= ta.simple_at(ta.len()) {
            wins += 1;
        }
    }
    let share = wins as f64 / pairs as f64;
    let detail = format!("expert final regret <= adversarial in {wins}/{pairs} pairs");
    if share >= 0.8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_instance(rng: &mut ChaCha8Rng, t: usize) -> (Dataset, GpHyperparams) {
    let bounds = Bounds::uniform(0.0, 5.0, 2).unwrap();
    let pts = common::random_points(rng, t, 2, 0.0, 5.0);
    let ys = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let h = GpHyperparams::new(rng.gen_range(0.3..3.0), rng.gen_range(0.2..5.0), rng.gen_range(1e-3..0.5)).unwrap();
    (Dataset::from_parts(bounds, pts, ys).unwrap(), h)
}

fn gp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_grad = 0.0f64;
    for _ in 0..50 {
        let (data, h) = random_instance(&mut rng, 6);
        let (_, g) = log_marginal_likelihood(&data, &h).unwrap();
        let theta = [h.lengthscale.ln(), h.signal_variance.ln(), h.noise_variance.ln()];
        let f = |t: [f64; 3]| {
            let hp = GpHyperparams::new(t[0].exp(), t[1].exp(), t[2].exp()).unwrap();
            log_marginal_likelihood(&data, &hp).unwrap().0
        };
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..3 {
            let (mut up, mut down) = (theta, theta);
            up[k] += 1e-5;
            down[k] -= 1e-5;
            let fd = (f(up) - f(down)) / 2e-5;
            num += (g[k] - fd).powi(2);
            den += fd * fd;
        }
        worst_grad = worst_grad.max(num.sqrt() / den.sqrt());
    }
    let mut worst_post = 0.0f64;
    for _ in 0..20 {
        let t = rng.gen_range(5..10);
        let (data, h) = random_instance(&mut rng, t);
        let model = GpModel::new(data.clone(), h).unwrap();
        for x in common::random_points(&mut rng, 11, 2, 0.0, 5.0) {
            let (m, s) = model.posterior(&x).unwrap();
            let (mo, so) = common::dense_posterior(
                data.points(),
                data.values(),
                h.lengthscale,
                h.signal_variance,
                h.noise_variance + model.jitter(),
                &x,
            );
            worst_post = worst_post.max((m - mo).abs()).max((s - so).abs());
        }
    }
    let detail = format!(
        "max gradient relative error {worst_grad:.2e} over 50 instances; max posterior error {worst_post:.2e} over 20"
    );
    if worst_grad <= 1e-4 && worst_post <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn nsga2_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..80);
        let coarse = rng.gen_bool(0.5);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                if coarse {
                    [rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64]
                } else {
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
                }
            })
            .collect();
        if non_dominated_sort(&pts) != common::brute_fronts(&pts) {
            mismatches += 1;
        }
    }
    let problem = MooProblem::new(Bounds::uniform(0.0, 1.0, 1).unwrap(), |x: &[f64]| [x[0], 1.0 - x[0]]);
    let cfg = Nsga2Config::default();
    let front = nsga2(&problem, &cfg).unwrap();
    let hv = hypervolume_2d(&front.objective_values, [0.0, 0.0]);
    let again = nsga2(&problem, &cfg).unwrap();
    let identical = serde_json::to_vec(&front).unwrap() == serde_json::to_vec(&again).unwrap();
    let detail = format!(
        "sort mismatches {mismatches}/200; hypervolume {hv:.4}; rerun byte-identical: {identical}"
    );
    if mismatches == 0 && hv >= 0.45 && identical {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn variability_objective() -> Outcome {
    let bounds = Bounds::uniform(0.0, 10.0, 1).unwrap();
    let h = GpHyperparams::new(1.2, 1.5, 1e-2).unwrap();
    let data = Dataset::from_parts(
        bounds,
        vec![vec![0.5], vec![2.0], vec![3.1], vec![6.0], vec![8.7]],
        vec![0.2, 1.1, -0.3, 0.8, -1.0],
    )
    .unwrap();
    let model = GpModel::new(data, h).unwrap();

    let mut closed = 0.0f64;
    for d in [0.05, 0.3, 1.0, 2.5, 6.0] {
        let rho = common::matern(d, h.lengthscale, h.signal_variance) / h.signal_variance;
        let expected = (h.signal_variance.powi(2) * (1.0 - rho * rho)).ln();
        closed = closed.max((variability(&model, &[vec![1.0]], &[1.0 + d]) - expected).abs());
    }
    let sentinel = variability(&model, &[vec![2.0], vec![4.0]], &[4.0]) == VARIABILITY_SENTINEL;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut perm = 0.0f64;
    for _ in 0..100 {
        let rows = common::random_points(&mut rng, 4, 1, 0.0, 10.0);
        let anchor = [rng.gen_range(0.0..10.0)];
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 2);
        perm = perm.max((variability(&model, &rows, &anchor) - variability(&model, &shuffled, &anchor)).abs());
    }

    let cfg = UtilityConfig::default();
    let candidates = [1.1, 2.6, 4.4, 5.2, 9.0];
    let anchor = vec![7.0];
    let (mut with_log, mut with_det) = (Vec::new(), Vec::new());
    for a in 0..5 {
        for b in a + 1..5 {
            for c in b + 1..5 {
                let rows = vec![vec![candidates[a]], vec![candidates[b]], vec![candidates[c]]];
                let u = batch_utility(&model, &rows, &cfg);
                with_log.push([u, variability(&model, &rows, &anchor)]);
                let mut aug = rows.clone();
                aug.push(anchor.clone());
                with_det.push([u, common::determinant(&common::brute_kernel(&aug, h.lengthscale, h.signal_variance))]);
            }
        }
    }
    let same_front = common::pareto_set(&with_log) == common::pareto_set(&with_det);

    let detail = format!(
        "closed-form error {closed:.1e}; duplicate -> sentinel: {sentinel}; permutation drift {perm:.1e}; det/log-det Pareto sets equal: {same_front}"
    );
    if closed <= 1e-10 && sentinel && perm <= 1e-12 && same_front {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn knee_selection() -> Outcome {
    let middle = knee_point(&[[0.0, 1.0], [0.5, 0.9], [1.0, 0.0]]) == 1;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut changed = 0;
    for _ in 0..100 {
        let n = rng.gen_range(3..25);
        let curvature = rng.gen_range(0.3..3.0);
        let front: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let t: f64 = rng.gen_range(0.0..1.0);
                [t, (1.0 - t.powf(curvature)).max(0.0).powf(1.0 / curvature)]
            })
            .collect();
        let (a0, b0) = (rng.gen_range(0.01..100.0), rng.gen_range(-50.0..50.0));
        let (a1, b1) = (rng.gen_range(0.01..100.0), rng.gen_range(-50.0..50.0));
        let mapped: Vec<[f64; 2]> = front.iter().map(|o| [a0 * o[0] + b0, a1 * o[1] + b1]).collect();
        if knee_point(&front) != knee_point(&mapped) {
            changed += 1;
        }
    }
    let detail = format!("3-point example picks middle: {middle}; knee changed in {changed}/100 affine trials");
    if middle && changed == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn wave(x: &[f64]) -> f64 {
    x.iter().map(|v| (1.3 * v).sin() - 0.05 * (v - 6.0).powi(2)).sum()
}

fn loop_invariants() -> Outcome {
    let mut violations: Vec<String> = Vec::new();
    let mut sets = 0;
    let mut runs = 0;
    for (seed, dim) in [(0u64, 1usize), (1, 1), (2, 2), (3, 2), (4, 1)] {
        let bounds = Bounds::uniform(0.0, 10.0, dim).unwrap();
        let cfg = LoopConfig {
            seed,
            max_evaluations: 10,
            ..LoopConfig::default()
        };
        let points = initial_design(&cfg, &bounds);
        let values: Vec<f64> = points.iter().map(|x| wave(x)).collect();
        let mut state = LoopState::from_initial(cfg, bounds, points, values).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let behavior: Behavior = ["expert", "adversarial", "pbest:0.5"][seed as usize % 3].parse().unwrap();
        let mut incumbent = state.incumbent().1;
        while !state.is_finished() {
            let set = state.propose_choices().unwrap();
            sets += 1;
            let opt = set.optimum_index();
            if set.choices.iter().filter(|c| c.source == ChoiceSource::UtilityOptimum).count() != 1 {
                violations.push(format!("seed {seed}: optimum tag count"));
            }
            for (i, c) in set.choices.iter().enumerate() {
                if c.utility != ucb(state.model(), &c.point, &state.config().utility) {
                    violations.push(format!("seed {seed}: stale utility"));
                }
                if set.choices[opt].utility < c.utility - 1e-9 {
                    violations.push(format!("seed {seed}: x* utility dominated"));
                }
                if !state.bounds().contains(&c.point) {
                    violations.push(format!("seed {seed}: choice out of bounds"));
                }
                for o in &set.choices[i + 1..] {
                    if common::euclid(&c.point, &o.point) <= DISTINCT_TOLERANCE {
                        violations.push(format!("seed {seed}: duplicate choices"));
                    }
                }
            }
            let truth: Vec<f64> = set.choices.iter().map(|c| wave(&c.point)).collect();
            let idx = egbo::practitioner::select(&behavior, &set, &truth, &mut rng).unwrap();
            state.apply_selection(&set, idx, truth[idx]).unwrap();
            let now = state.incumbent().1;
            if now < incumbent {
                violations.push(format!("seed {seed}: incumbent decreased"));
            }
            incumbent = now;
        }
        match state.replay() {
            Ok(r) if r.history() == state.history() => {}
            _ => violations.push(format!("seed {seed}: replay diverged")),
        }
        runs += 1;
    }
    let detail = format!("{runs} runs, {sets} choice sets checked, {} violations", violations.len());
    if violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", violations.join("; ")))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("GP correctness", gp_correctness),
        ("NSGA-II correctness", nsga2_correctness),
        ("variability objective", variability_objective),
        ("knee point", knee_selection),
        ("loop invariants", loop_invariants),
        ("regret ordering at iteration 10", regret_ordering),
        ("random-selector recovery", random_selector_recovery),
        ("average-regret convergence", average_regret_convergence),
        ("expert vs adversarial final regret", expert_beats_adversarial),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
