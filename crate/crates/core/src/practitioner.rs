//! Simulated practitioners used for benchmarking.
//!
//! | behaviour   | picks                                                     |
//! |-------------|-----------------------------------------------------------|
//! | expert      | the choice with the best true value                       |
//! | adversarial | the choice with the worst true value                      |
//! | trusting    | the choice with the largest utility                       |
//! | pbest:q     | the best with probability q, else uniform over the others |
//!
//! Ties always go to the lowest index.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::ChoiceSet;
use crate::error::{input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    Expert,
    Adversarial,
    Trusting,
    ProbBest { p_best: f64 },
}

impl Behavior {
    pub fn prob_best(p_best: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_best) {
            return Err(input(format!("p_best must lie in [0, 1], got {p_best}")));
        }
        Ok(Behavior::ProbBest { p_best })
    }

    /// Whether the behaviour needs the true objective values of the choices.
    pub fn needs_truth(&self) -> bool {
        !matches!(self, Behavior::Trusting)
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Behavior::Expert => write!(f, "expert"),
            Behavior::Adversarial => write!(f, "adversarial"),
            Behavior::Trusting => write!(f, "trusting"),
            Behavior::ProbBest { p_best } => write!(f, "pbest:{p_best}"),
        }
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "expert" => Ok(Behavior::Expert),
            "adversarial" => Ok(Behavior::Adversarial),
            "trusting" => Ok(Behavior::Trusting),
            other => match other.strip_prefix("pbest:") {
                Some(q) => {
                    let q: f64 = q
                        .parse()
                        .map_err(|_| input(format!("bad probability in behaviour {s:?}")))?;
                    Behavior::prob_best(q)
                }
                None => Err(input(format!(
                    "unknown behaviour {s:?} (expected expert, adversarial, trusting or pbest:<q>)"
                ))),
            },
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Picks a choice index. `true_values[i]` is the objective at choice `i`.
///
/// `ProbBest` always consumes two draws from `rng` so the stream stays
/// aligned regardless of the outcome.
pub fn select<R: Rng + ?Sized>(
    behavior: &Behavior,
    choices: &ChoiceSet,
    true_values: &[f64],
    rng: &mut R,
) -> Result<usize> {
    let p = choices.len();
    if p == 0 {
        return Err(input("cannot select from an empty choice set"));
    }
    if behavior.needs_truth() && true_values.len() != p {
        return Err(input(format!(
            "{} true values supplied for {p} choices",
            true_values.len()
        )));
    }
    let idx = match behavior {
        Behavior::Expert => argmax(true_values),
        Behavior::Adversarial => argmin(true_values),
        Behavior::Trusting => {
            let utilities: Vec<f64> = choices.choices.iter().map(|c| c.utility).collect();
            argmax(&utilities)
        }
        Behavior::ProbBest { p_best } => {
            let best = argmax(true_values);
            let roll: f64 = rng.gen();
            let other: usize = if p > 1 { rng.gen_range(0..p - 1) } else { 0 };
            if roll < *p_best || p == 1 {
                best
            } else if other >= best {
                other + 1
            } else {
                other
            }
        }
    };
    Ok(idx)
}
