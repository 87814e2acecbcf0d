//! Utility (acquisition) functions and the two batch objectives.
//!
//! * [`ucb`]: posterior mean plus `beta` posterior standard deviations.
//! * [`maximize_utility`]: multistart bounded quasi-Newton search for the
//!   single best point `x*`.
//! * [`batch_utility`]: summed utility of the alternate rows (the anchor is
//!   not included).
//! * [`variability`]: log-determinant of the kernel matrix over the
//!   alternates plus the anchor.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::data::Bounds;
use crate::gp::{kernel_matrix, GpHyperparams, GpModel};
use crate::lhs::latin_hypercube;
use crate::optim::{maximize_bounded, QuasiNewtonConfig};
use crate::rng::{stream_rng, Stream};

/// Value returned by [`variability`] when the augmented kernel matrix is
/// numerically singular (coincident or near-coincident points).
pub const VARIABILITY_SENTINEL: f64 = -1e300;

/// Conditional-variance ratio below which a Cholesky pivot counts as zero.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Something that scores candidate evaluations under a fitted model.
pub trait Utility: Sync {
    fn utility(&self, model: &GpModel, x: &[f64]) -> f64;
}

/// Upper-confidence-bound weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub beta: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self { beta: 2.0 }
    }
}

impl Utility for UtilityConfig {
    fn utility(&self, model: &GpModel, x: &[f64]) -> f64 {
        ucb(model, x, self)
    }
}

pub fn ucb(model: &GpModel, x: &[f64], cfg: &UtilityConfig) -> f64 {
    let (mean, std) = model.predict(x);
    mean + cfg.beta * std
}

/// Restart count and local-solver settings for [`maximize_utility`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            restarts: 36,
            max_iterations: 500,
            tolerance: 1e-12,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub(crate) fn local(&self) -> QuasiNewtonConfig {
        QuasiNewtonConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            ..QuasiNewtonConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMaximum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Multistart maximisation of a utility over `bounds`.
///
/// Starts come from a seeded Latin hypercube; the best local result wins,
/// ties going to the lowest start index.
pub fn maximize_utility<U: Utility>(
    model: &GpModel,
    bounds: &Bounds,
    utility: &U,
    cfg: &AcquisitionConfig,
) -> UtilityMaximum {
    let mut rng = stream_rng(cfg.seed, Stream::Acquisition, model.train_data().len() as u64);
    let starts = latin_hypercube(bounds, cfg.restarts.max(1), &mut rng);
    let local = cfg.local();
    let mut best: Option<UtilityMaximum> = None;
    for start in &starts {
        let r = maximize_bounded(|x| utility.utility(model, x), start, bounds, &local);
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(UtilityMaximum {
                x: r.x,
                value: r.value,
            });
        }
    }
    best.expect("at least one start")
}

/// Local ascent of the utility from a single point.
pub fn polish_utility<U: Utility>(
    model: &GpModel,
    bounds: &Bounds,
    utility: &U,
    start: &[f64],
    cfg: &AcquisitionConfig,
) -> UtilityMaximum {
    let r = maximize_bounded(|x| utility.utility(model, x), start, bounds, &cfg.local());
    UtilityMaximum {
        x: r.x,
        value: r.value,
    }
}

/// Sum of the utilities of the alternate rows.
pub fn batch_utility<U: Utility>(model: &GpModel, rows: &[Vec<f64>], utility: &U) -> f64 {
    rows.iter().map(|x| utility.utility(model, x)).sum()
}

/// Log-determinant of the noise-free kernel matrix over `rows ∪ {anchor}`,
/// using the model's fitted lengthscale and signal variance.
///
/// Returns [`VARIABILITY_SENTINEL`] when the matrix is singular to working
/// precision.
pub fn variability(model: &GpModel, rows: &[Vec<f64>], anchor: &[f64]) -> f64 {
    let hp = model.hyperparams();
    log_det_kernel(rows, anchor, hp)
}

pub(crate) fn log_det_kernel(rows: &[Vec<f64>], anchor: &[f64], hp: &GpHyperparams) -> f64 {
    let mut aug: Vec<Vec<f64>> = rows.to_vec();
    aug.push(anchor.to_vec());
    // canonical order so the rounding does not depend on how rows are listed
    aug.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let hp = GpHyperparams {
        noise_variance: 0.0,
        ..*hp
    };
    let k = match kernel_matrix(&aug, &hp) {
        Ok(k) => k,
        Err(_) => return VARIABILITY_SENTINEL,
    };
    let chol = match Cholesky::new(k) {
        Some(c) => c,
        None => return VARIABILITY_SENTINEL,
    };
    let l = chol.l_dirty();
    let floor = SINGULAR_PIVOT * hp.signal_variance;
    let mut log_det = 0.0;
    for i in 0..l.nrows() {
        let pivot_sq = l[(i, i)] * l[(i, i)];
        if !(pivot_sq.is_finite() && pivot_sq > floor) {
            return VARIABILITY_SENTINEL;
        }
        log_det += pivot_sq.ln();
    }
    log_det
}
