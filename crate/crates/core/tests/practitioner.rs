use egbo::engine::{Choice, ChoiceSource};
use egbo::practitioner::select;
use egbo::{Behavior, ChoiceSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn choice_set(utilities: &[f64]) -> ChoiceSet {
    let top = utilities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap()
        .0;
    ChoiceSet {
        iteration: 0,
        choices: utilities
            .iter()
            .enumerate()
            .map(|(i, &u)| Choice {
                point: vec![i as f64],
                utility: u,
                predicted_mean: u,
                predicted_std: 0.0,
                source: if i == top {
                    ChoiceSource::UtilityOptimum
                } else {
                    ChoiceSource::KneeAlternate
                },
            })
            .collect(),
        pareto_summary: None,
    }
}

#[test]
fn deterministic_behaviours() {
    let set = choice_set(&[0.1, 0.5, 0.9, 0.2]);
    let truth = [1.0, 3.0, 2.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(select(&Behavior::Expert, &set, &truth, &mut rng).unwrap(), 1);
    assert_eq!(select(&Behavior::Adversarial, &set, &truth, &mut rng).unwrap(), 3);
    assert_eq!(select(&Behavior::Trusting, &set, &[], &mut rng).unwrap(), 2);
    assert_eq!(select(&Behavior::Trusting, &set, &[], &mut rng).unwrap(), set.optimum_index());

    let tied = [2.0, 5.0, 5.0, 2.0];
    assert_eq!(select(&Behavior::Expert, &set, &tied, &mut rng).unwrap(), 1);
    assert_eq!(select(&Behavior::Adversarial, &set, &tied, &mut rng).unwrap(), 0);
}

#[test]
fn missing_truth_is_an_error() {
    let set = choice_set(&[0.1, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(select(&Behavior::Expert, &set, &[1.0], &mut rng).is_err());
    assert!(select(&Behavior::prob_best(0.5).unwrap(), &set, &[], &mut rng).is_err());
}

#[test]
fn certain_best_equals_expert() {
    let always = Behavior::prob_best(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..500 {
        let p = rng.gen_range(2..7);
        let utilities: Vec<f64> = (0..p).map(|_| rng.gen()).collect();
        let truth: Vec<f64> = (0..p).map(|_| rng.gen_range(0..4) as f64).collect();
        let set = choice_set(&utilities);
        let a = select(&always, &set, &truth, &mut rng).unwrap();
        let b = select(&Behavior::Expert, &set, &truth, &mut rng).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn quarter_best_is_uniform_over_four() {
    let behavior = Behavior::prob_best(0.25).unwrap();
    let set = choice_set(&[0.4, 0.3, 0.2, 0.1]);
    let truth = [0.0, 0.0, 7.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0usize; 4];
    let draws = 10_000;
    for _ in 0..draws {
        counts[select(&behavior, &set, &truth, &mut rng).unwrap()] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let freq = *c as f64 / draws as f64;
        assert!((freq - 0.25).abs() <= 0.02, "choice {i}: {freq}");
    }
}

#[test]
fn best_probability_is_exact() {
    let behavior = Behavior::prob_best(0.6).unwrap();
    let set = choice_set(&[0.4, 0.3, 0.2]);
    let truth = [0.0, 5.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hits = (0..10_000)
        .filter(|_| select(&behavior, &set, &truth, &mut rng).unwrap() == 1)
        .count();
    assert!((hits as f64 / 10_000.0 - 0.6).abs() <= 0.02);
}

#[test]
fn behaviour_strings() {
    for s in ["expert", "adversarial", "trusting", "pbest:0.5", "pbest:0.25"] {
        let b: Behavior = s.parse().unwrap();
        assert_eq!(b.to_string(), s);
    }
    assert_eq!("Expert".parse::<Behavior>().unwrap(), Behavior::Expert);
    for bad in ["random", "pbest:", "pbest:1.5", "pbest:-0.1", "pbest:x"] {
        assert!(bad.parse::<Behavior>().is_err(), "{bad}");
    }
}
