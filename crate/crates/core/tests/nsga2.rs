mod common;

use egbo::acquisition::{batch_utility, variability, UtilityConfig};
use egbo::nsga2::{
    crowding_distance, hypervolume_2d, knee_point, non_dominated_sort, nsga2, nsga2_traced, MooProblem,
    Nsga2Config,
};
use egbo::{Bounds, Dataset, GpHyperparams, GpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_objectives(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    // coarse values half the time so ties and duplicates are exercised
    let coarse = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            if coarse {
                [rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64]
            } else {
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
            }
        })
        .collect()
}

#[test]
fn sort_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    for _ in 0..200 {
        let n = rng.gen_range(1..80);
        let pts = random_objectives(&mut rng, n);
        assert_eq!(non_dominated_sort(&pts), common::brute_fronts(&pts));
    }
}

#[test]
fn sort_small_examples() {
    assert_eq!(non_dominated_sort(&[[1.0, 1.0], [2.0, 2.0]]), vec![vec![1], vec![0]]);
    assert_eq!(non_dominated_sort(&[[1.0, 2.0], [2.0, 1.0]]), vec![vec![0, 1]]);
    let fronts = non_dominated_sort(&[[0.0, f64::NEG_INFINITY], [0.0, 0.0], [f64::NAN, -1.0]]);
    assert_eq!(fronts[0], vec![1]);
}

#[test]
fn crowding_examples() {
    assert_eq!(crowding_distance(&[[0.0, 1.0], [1.0, 0.0]]), vec![f64::INFINITY; 2]);
    let d = crowding_distance(&[[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]);
    assert_eq!(d[0], f64::INFINITY);
    assert_eq!(d[2], f64::INFINITY);
    assert!((d[1] - 2.0).abs() < 1e-12);
    let same = crowding_distance(&[[1.0, 1.0]; 4]);
    assert_eq!(same.iter().filter(|v| v.is_infinite()).count(), 2);
    assert_eq!(same.iter().filter(|v| **v == 0.0).count(), 2);
}

fn trade_off() -> MooProblem<impl Fn(&[f64]) -> [f64; 2] + Sync> {
    MooProblem::new(Bounds::uniform(0.0, 1.0, 1).unwrap(), |x: &[f64]| [x[0], 1.0 - x[0]])
}

#[test]
fn linear_trade_off_front_covers_the_interval() {
    let front = nsga2(&trade_off(), &Nsga2Config::default()).unwrap();
    let hv = hypervolume_2d(&front.objective_values, [0.0, 0.0]);
    assert!(hv >= 0.45, "hypervolume {hv}");
    assert!(hv <= 0.5 + 1e-12);
    let xs: Vec<f64> = front.solutions.iter().map(|s| s[0]).collect();
    assert!(xs.iter().cloned().fold(f64::INFINITY, f64::min) < 0.02);
    assert!(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.98);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let cfg = Nsga2Config {
        seed: 77,
        ..Nsga2Config::default()
    };
    let a = serde_json::to_string(&nsga2(&trade_off(), &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&nsga2(&trade_off(), &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = Nsga2Config { seed: 78, ..cfg };
    assert_ne!(a, serde_json::to_string(&nsga2(&trade_off(), &other).unwrap()).unwrap());
}

#[test]
fn front_is_mutually_non_dominated_and_deduplicated() {
    let problem = MooProblem::new(Bounds::uniform(-1.0, 1.0, 3).unwrap(), |x: &[f64]| {
        [-(x[0] - 0.5).powi(2) - x[1] * x[1], -(x[0] + 0.5).powi(2) - x[2] * x[2]]
    });
    let front = nsga2(&problem, &Nsga2Config::default()).unwrap();
    let objs = &front.objective_values;
    assert_eq!(common::pareto_set(objs).len(), objs.len());
    for i in 0..front.len() {
        for j in i + 1..front.len() {
            let gap = front.solutions[i]
                .iter()
                .zip(&front.solutions[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap > 1e-9);
        }
    }
    assert!(front.knee_index < front.len());
}

#[test]
fn best_first_objective_never_regresses() {
    let problem = MooProblem::new(Bounds::uniform(-2.0, 2.0, 2).unwrap(), |x: &[f64]| {
        [-(x[0] * x[0] + x[1] * x[1]), -((x[0] - 1.0).powi(2) + x[1] * x[1])]
    });
    let (_, stats) = nsga2_traced(&problem, &Nsga2Config::default(), &[]).unwrap();
    assert_eq!(stats.len(), Nsga2Config::default().generations + 1);
    for w in stats.windows(2) {
        assert!(w[1].best_first >= w[0].best_first);
        assert!(w[1].best_second >= w[0].best_second);
    }
}

#[test]
fn constant_second_objective_collapses_to_argmax() {
    let problem = MooProblem::new(Bounds::uniform(0.0, 1.0, 1).unwrap(), |x: &[f64]| {
        [-(x[0] - 0.3).powi(2), 4.0]
    });
    let front = nsga2(&problem, &Nsga2Config::default()).unwrap();
    for s in &front.solutions {
        assert!((s[0] - 0.3).abs() < 1e-2, "{s:?}");
    }
}

#[test]
fn nan_objectives_are_dominated() {
    let problem = MooProblem::new(Bounds::uniform(0.0, 1.0, 1).unwrap(), |x: &[f64]| {
        if x[0] > 0.5 {
            [f64::NAN, f64::NAN]
        } else {
            [x[0], 0.5 - x[0]]
        }
    });
    let front = nsga2(&problem, &Nsga2Config::default()).unwrap();
    assert!(front.solutions.iter().all(|s| s[0] <= 0.5));
    assert!(front.objective_values.iter().all(|o| o[0].is_finite() && o[1].is_finite()));
}

#[test]
fn knee_examples() {
    assert_eq!(knee_point(&[[0.0, 1.0], [0.5, 0.9], [1.0, 0.0]]), 1);
    assert_eq!(knee_point(&[[0.2, 1.0], [0.7, 0.1]]), 1);
    assert_eq!(knee_point(&[[3.0, 0.0]]), 0);
    let collinear: Vec<[f64; 2]> = (0..5).map(|i| [i as f64 * 0.25, 1.0 - i as f64 * 0.25]).collect();
    assert_eq!(knee_point(&collinear), 4);
}

fn random_front(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = rng.gen_range(3..25);
    let curvature = rng.gen_range(0.3..3.0);
    (0..n)
        .map(|_| {
            let t: f64 = rng.gen_range(0.0..1.0);
            [t, (1.0 - t.powf(curvature)).max(0.0).powf(1.0 / curvature)]
        })
        .collect()
}

#[test]
fn knee_matches_geometric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let front = random_front(&mut rng);
        let d = common::knee_distances(&front);
        let k = knee_point(&front);
        let best = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(d[k] >= best - 1e-12);
    }
}

#[test]
fn knee_is_invariant_under_positive_affine_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let front = random_front(&mut rng);
        let k = knee_point(&front);
        let (a0, b0) = (rng.gen_range(0.01..100.0), rng.gen_range(-50.0..50.0));
        let (a1, b1) = (rng.gen_range(0.01..100.0), rng.gen_range(-50.0..50.0));
        let mapped: Vec<[f64; 2]> = front.iter().map(|o| [a0 * o[0] + b0, a1 * o[1] + b1]).collect();
        assert_eq!(knee_point(&mapped), k);
    }
}

fn min_spacing(rows: &[Vec<f64>], anchor: &[f64]) -> f64 {
    let mut all: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    all.push(anchor);
    let mut best = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            best = best.min(common::euclid(all[i], all[j]));
        }
    }
    best
}

#[test]
fn variability_extreme_is_more_spread_than_knee() {
    let bounds = Bounds::uniform(0.0, 10.0, 1).unwrap();
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = common::random_points(&mut rng, 5, 1, 0.0, 10.0);
        let ys = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = GpHyperparams::new(1.0, 1.0, 1e-4).unwrap();
        let model = GpModel::new(Dataset::from_parts(bounds.clone(), pts, ys).unwrap(), h).unwrap();
        let anchor = vec![rng.gen_range(0.0..10.0)];
        let cfg = UtilityConfig::default();
        let problem = MooProblem::new(bounds.replicate(3), |flat: &[f64]| {
            let rows: Vec<Vec<f64>> = flat.chunks(1).map(<[f64]>::to_vec).collect();
            [batch_utility(&model, &rows, &cfg), variability(&model, &rows, &anchor)]
        });
        let front = nsga2(&problem, &Nsga2Config { seed, ..Nsga2Config::default() }).unwrap();
        let s_extreme = (0..front.len())
            .max_by(|&a, &b| front.objective_values[a][1].total_cmp(&front.objective_values[b][1]))
            .unwrap();
        let spread = min_spacing(&front.rows(s_extreme, 1), &anchor);
        let knee = min_spacing(&front.rows(front.knee_index, 1), &anchor);
        assert!(spread >= knee, "seed {seed}: {spread} < {knee}");
    }
}
