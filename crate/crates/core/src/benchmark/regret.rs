use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Slack allowed when an observation exceeds the supplied optimum.
pub const OPTIMUM_SLACK: f64 = 1e-6;

/// Per-evaluation regret of one run (maximisation convention).
///
/// Entry `t - 1` covers the first `t` evaluations, initial design included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub simple_regret: Vec<f64>,
    pub average_regret: Vec<f64>,
    pub f_star: f64,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.simple_regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simple_regret.is_empty()
    }

    /// Simple regret after `t` evaluations (1-based).
    pub fn simple_at(&self, t: usize) -> f64 {
        self.simple_regret[t - 1]
    }

    /// Average regret after `t` evaluations (1-based).
    pub fn average_at(&self, t: usize) -> f64 {
        self.average_regret[t - 1]
    }
}

/// Simple regret `f* − max_{i≤t} y_i` and average regret
/// `(1/t) Σ_{i≤t} (f* − y_i)`.
pub fn regret(observed: &[f64], f_star: f64) -> Result<RegretTrace> {
    if !f_star.is_finite() {
        return Err(input("optimum must be finite"));
    }
    let mut simple = Vec::with_capacity(observed.len());
    let mut average = Vec::with_capacity(observed.len());
    let mut best = f64::NEG_INFINITY;
    let mut total = 0.0;
    for (t, y) in observed.iter().enumerate() {
        if !y.is_finite() {
            return Err(input(format!("observation {t} is not finite")));
        }
        if *y > f_star + OPTIMUM_SLACK {
            return Err(input(format!(
                "observation {y} exceeds the optimum {f_star}"
            )));
        }
        best = best.max(*y);
        total += (f_star - y).max(0.0);
        simple.push((f_star - best).max(0.0));
        average.push(total / (t + 1) as f64);
    }
    Ok(RegretTrace {
        simple_regret: simple,
        average_regret: average,
        f_star,
    })
}
