//! Objective functions for benchmarking, all in maximisation form.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Bounds;
use crate::error::{input, Result};
use crate::gp::{cholesky_jittered, distance, kernel_matrix, matern52, GpHyperparams};
use crate::lhs::{halton, latin_hypercube};
use crate::optim::{maximize_bounded, QuasiNewtonConfig};
use crate::rng::{stream_rng, Stream};

/// Anchor count for sampled functions in two or more dimensions.
pub const DEFAULT_ANCHORS: usize = 512;

/// Probe budget used when estimating the optimum of a sampled function.
pub const DEFAULT_PROBE_BUDGET: usize = 10_000;

type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// How a function was produced; echoed into benchmark outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FunctionSpec {
    GpSample {
        dimension: usize,
        lengthscale: f64,
        lower: f64,
        upper: f64,
        seed: u64,
        anchors: usize,
    },
    Standard {
        name: String,
        dimension: usize,
    },
}

#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub dimension: usize,
    pub bounds: Bounds,
    pub true_max: f64,
    pub true_argmax: Option<Vec<f64>>,
    pub spec: FunctionSpec,
    /// Anchor points and the jointly sampled values there (sampled functions only).
    pub anchors: Option<Arc<AnchorSet>>,
    evaluate: Objective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Diagonal jitter needed to factorise the anchor covariance.
    pub jitter: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("true_max", &self.true_max)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }

    /// Shareable handle to the objective.
    pub fn objective(&self) -> Objective {
        Arc::clone(&self.evaluate)
    }
}

/// A function drawn from a zero-mean, unit-variance Matérn 5/2 GP prior.
///
/// An exact joint sample is drawn at the anchors (a uniform grid in 1D, a
/// Halton set otherwise) and the function is the noise-free conditional mean
/// given those values, so it is smooth, deterministic and exact at the anchors.
struct AnchoredSample {
    anchors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    hp: GpHyperparams,
}

impl AnchoredSample {
    fn eval(&self, x: &[f64]) -> f64 {
        self.anchors
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * matern52(distance(a, x), &self.hp))
            .sum()
    }
}

fn anchor_points(bounds: &Bounds, anchors: usize) -> Vec<Vec<f64>> {
    if bounds.dim() == 1 {
        let (lo, w) = (bounds.lower()[0], bounds.width(0));
        (0..anchors)
            .map(|i| vec![lo + w * i as f64 / (anchors - 1).max(1) as f64])
            .collect()
    } else {
        halton(bounds, anchors)
    }
}

/// Samples a GP-prior test function and estimates its maximum.
pub fn sample_gp_prior_function(
    dimension: usize,
    lengthscale: f64,
    bounds: &Bounds,
    seed: u64,
) -> Result<TestFunction> {
    sample_gp_prior_function_with(dimension, lengthscale, bounds, seed, DEFAULT_ANCHORS, DEFAULT_PROBE_BUDGET)
}

pub fn sample_gp_prior_function_with(
    dimension: usize,
    lengthscale: f64,
    bounds: &Bounds,
    seed: u64,
    anchors: usize,
    probe_budget: usize,
) -> Result<TestFunction> {
    if bounds.dim() != dimension {
        return Err(input(format!(
            "bounds have dimension {} but {dimension} was requested",
            bounds.dim()
        )));
    }
    if anchors < 2 {
        return Err(input("need at least two anchors"));
    }
    let hp = GpHyperparams::new(lengthscale, 1.0, 0.0)?;
    let pts = anchor_points(bounds, anchors);
    let k = kernel_matrix(&pts, &hp)?;
    let (chol, jitter) = cholesky_jittered(&k, 1.0)?;
    let mut rng = stream_rng(seed, Stream::TestFunction, 0);
    let z = DVector::from_iterator(anchors, (0..anchors).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let sample = chol.l() * z;
    let weights = chol.solve(&sample);
    let anchor_set = AnchorSet {
        points: pts.clone(),
        values: sample.iter().copied().collect(),
        jitter,
    };
    let f = AnchoredSample {
        anchors: pts,
        weights: weights.iter().copied().collect(),
        hp,
    };
    let evaluate: Objective = Arc::new(move |x: &[f64]| f.eval(x));
    let mut func = TestFunction {
        name: format!("gp{dimension}d-{seed}"),
        dimension,
        bounds: bounds.clone(),
        true_max: f64::NAN,
        true_argmax: None,
        spec: FunctionSpec::GpSample {
            dimension,
            lengthscale,
            lower: bounds.lower()[0],
            upper: bounds.upper()[0],
            seed,
            anchors,
        },
        anchors: Some(Arc::new(anchor_set)),
        evaluate,
    };
    let (x, v) = estimate_true_max_at(&func, probe_budget, seed);
    func.true_max = v;
    func.true_argmax = Some(x);
    Ok(func)
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

fn griewank(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v / 4000.0).sum();
    let p: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    s - p + 1.0
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

/// Sums over complete groups of four; trailing coordinates are unused.
fn powell(x: &[f64]) -> f64 {
    x.chunks_exact(4)
        .map(|g| {
            (g[0] + 10.0 * g[1]).powi(2)
                + 5.0 * (g[2] - g[3]).powi(2)
                + (g[1] - 2.0 * g[2]).powi(4)
                + 10.0 * (g[0] - g[3]).powi(4)
        })
        .sum()
}

pub const STANDARD_FUNCTIONS: [&str; 5] = ["ackley", "griewank", "rastrigin", "rosenbrock", "powell"];

type StandardFn = fn(&[f64]) -> f64;

/// Negated standard minimisation benchmark with its usual domain.
pub fn standard_function(name: &str, dimension: usize) -> Result<TestFunction> {
    let (lo, hi, min_dim, argmin, f): (f64, f64, usize, f64, StandardFn) =
        match name.to_ascii_lowercase().as_str() {
            "ackley" => (-32.768, 32.768, 1, 0.0, ackley),
            "griewank" => (-600.0, 600.0, 1, 0.0, griewank),
            "rastrigin" => (-5.12, 5.12, 1, 0.0, rastrigin),
            "rosenbrock" => (-5.0, 10.0, 2, 1.0, rosenbrock),
            "powell" => (-4.0, 5.0, 4, 0.0, powell),
            other => {
                return Err(input(format!(
                    "unknown function {other:?} (expected one of {})",
                    STANDARD_FUNCTIONS.join(", ")
                )))
            }
        };
    if dimension < min_dim {
        return Err(input(format!(
            "{name} needs dimension >= {min_dim}, got {dimension}"
        )));
    }
    let name = name.to_ascii_lowercase();
    Ok(TestFunction {
        name: format!("{name}-{dimension}d"),
        dimension,
        bounds: Bounds::uniform(lo, hi, dimension)?,
        true_max: 0.0,
        true_argmax: Some(vec![argmin; dimension]),
        spec: FunctionSpec::Standard { name, dimension },
        anchors: None,
        evaluate: Arc::new(move |x: &[f64]| -f(x)),
    })
}

/// Rebuilds a function from its spec.
pub fn from_spec(spec: &FunctionSpec) -> Result<TestFunction> {
    match spec {
        FunctionSpec::GpSample {
            dimension,
            lengthscale,
            lower,
            upper,
            seed,
            anchors,
        } => sample_gp_prior_function_with(
            *dimension,
            *lengthscale,
            &Bounds::uniform(*lower, *upper, *dimension)?,
            *seed,
            *anchors,
            DEFAULT_PROBE_BUDGET,
        ),
        FunctionSpec::Standard { name, dimension } => standard_function(name, *dimension),
    }
}

/// Best value found by multistart quasi-Newton from 256 Latin-hypercube
/// starts plus the best points of a dense quasi-random probe.
pub fn estimate_true_max(func: &TestFunction, budget: usize, seed: u64) -> f64 {
    estimate_true_max_at(func, budget, seed).1
}

fn estimate_true_max_at(func: &TestFunction, budget: usize, seed: u64) -> (Vec<f64>, f64) {
    let bounds = &func.bounds;
    let mut rng = stream_rng(seed, Stream::Probe, 0);
    let mut starts = latin_hypercube(bounds, 256, &mut rng);

    let probe = if bounds.dim() == 1 {
        let (lo, w) = (bounds.lower()[0], bounds.width(0));
        (0..budget.max(2))
            .map(|i| vec![lo + w * i as f64 / (budget.max(2) - 1) as f64])
            .collect()
    } else {
        halton(bounds, budget)
    };
    let mut scored: Vec<(f64, Vec<f64>)> = probe.into_iter().map(|x| (func.evaluate(&x), x)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.extend(scored.iter().take(16).map(|(_, x)| x.clone()));

    let cfg = QuasiNewtonConfig::default();
    let mut best = scored
        .first()
        .map(|(v, x)| (x.clone(), *v))
        .unwrap_or_else(|| (starts[0].clone(), func.evaluate(&starts[0])));
    for s in &starts {
        let r = maximize_bounded(|x| func.evaluate(x), s, bounds, &cfg);
        if r.value > best.1 {
            best = (r.x, r.value);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_optima() {
        for name in STANDARD_FUNCTIONS {
            let f = standard_function(name, 4).unwrap();
            let x = f.true_argmax.clone().unwrap();
            assert!(f.evaluate(&x).abs() < 1e-12, "{name}: {}", f.evaluate(&x));
        }
    }

    #[test]
    fn dimension_checks() {
        assert!(standard_function("rosenbrock", 1).is_err());
        assert!(standard_function("powell", 3).is_err());
        assert!(standard_function("sphere", 2).is_err());
        assert!(standard_function("ackley", 1).is_ok());
    }

    #[test]
    fn powell_five_dimensions_ignores_last_coordinate() {
        let f = standard_function("powell", 5).unwrap();
        assert_eq!(f.evaluate(&[0.0, 0.0, 0.0, 0.0, 3.0]), 0.0);
    }
}
