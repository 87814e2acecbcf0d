//! Gaussian-process regression with an isotropic Matérn 5/2 kernel.
//!
//! Hyperparameters are trained by multistart Adam ascent on the log marginal
//! likelihood in log space. The fitted [`GpModel`] is immutable and caches
//! the Cholesky factor of `K + σ_n² I` so posterior queries cost one
//! triangular solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{input, Error, Result};
use crate::optim::Adam;
use crate::rng::{stream_rng, Stream};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Smallest posterior standard deviation reported.
pub const STD_FLOOR: f64 = 1e-12;

/// Jitter multipliers tried (relative to the signal variance) before giving up.
const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn new(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let hp = Self {
            lengthscale,
            signal_variance,
            noise_variance,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(input(format!("lengthscale must be > 0, got {}", self.lengthscale)));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(input(format!(
                "signal variance must be > 0, got {}",
                self.signal_variance
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(input(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// Matérn 5/2 covariance at distance `d`.
pub fn matern52(d: f64, hp: &GpHyperparams) -> f64 {
    let r = SQRT5 * d / hp.lengthscale;
    hp.signal_variance * (1.0 + r + r * r / 3.0) * (-r).exp()
}

/// Derivative of [`matern52`] with respect to `log(lengthscale)`.
fn matern52_dlog_lengthscale(d: f64, hp: &GpHyperparams) -> f64 {
    let r = SQRT5 * d / hp.lengthscale;
    hp.signal_variance * (r * r / 3.0) * (1.0 + r) * (-r).exp()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Matérn 5/2 covariance matrix (no noise term).
pub fn kernel_matrix(points: &[Vec<f64>], hp: &GpHyperparams) -> Result<DMatrix<f64>> {
    if let Some(first) = points.first() {
        let dim = first.len();
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(input(format!(
                "point {i} has dimension {} but point 0 has {dim}",
                p.len()
            )));
        }
    }
    let t = points.len();
    let mut k = DMatrix::zeros(t, t);
    for i in 0..t {
        k[(i, i)] = hp.signal_variance;
        for j in 0..i {
            let v = matern52(distance(&points[i], &points[j]), hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cholesky factorisation with escalating diagonal jitter.
///
/// Returns the factor and the absolute jitter that was added.
pub(crate) fn cholesky_jittered(
    matrix: &DMatrix<f64>,
    scale: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            let l = chol.l_dirty();
            if (0..l.nrows()).all(|i| l[(i, i)] > 0.0 && l[(i, i)].is_finite()) {
                return Ok((chol, jitter));
            }
        }
    }
    Err(Error::Numerical(format!(
        "matrix of size {} is not positive definite after jitter {:e}",
        matrix.nrows(),
        JITTER_LADDER[JITTER_LADDER.len() - 1] * scale
    )))
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Gaussian log marginal likelihood of the mean-centred observations and its
/// gradient with respect to `(log ℓ, log σ_f², log σ_n²)`.
pub fn log_marginal_likelihood(data: &Dataset, hp: &GpHyperparams) -> Result<(f64, [f64; 3])> {
    hp.validate()?;
    if data.is_empty() {
        return Err(input("log marginal likelihood needs at least one observation"));
    }
    let t = data.len();
    let offset = mean(data.values());
    let centred = DVector::from_iterator(t, data.values().iter().map(|y| y - offset));

    let k_signal = kernel_matrix(data.points(), hp)?;
    let mut k_y = k_signal.clone();
    for i in 0..t {
        k_y[(i, i)] += hp.noise_variance;
    }
    let (chol, _) = cholesky_jittered(&k_y, hp.signal_variance)?;
    let alpha = chol.solve(&centred);
    let l = chol.l_dirty();
    let log_det_half: f64 = (0..t).map(|i| l[(i, i)].ln()).sum();
    let value = -0.5 * centred.dot(&alpha)
        - log_det_half
        - 0.5 * t as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = α αᵀ − K⁻¹; each gradient entry is ½ tr(W ∂K).
    let mut w = chol.inverse();
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);

    let mut g_len = 0.0;
    let mut g_sig = 0.0;
    let mut trace_w = 0.0;
    for i in 0..t {
        trace_w += w[(i, i)];
        g_sig += w[(i, i)] * k_signal[(i, i)];
        for j in 0..i {
            let d = distance(&data.points()[i], &data.points()[j]);
            // symmetric off-diagonal pairs counted twice
            g_len += 2.0 * w[(i, j)] * matern52_dlog_lengthscale(d, hp);
            g_sig += 2.0 * w[(i, j)] * k_signal[(i, j)];
        }
    }
    let grad = [0.5 * g_len, 0.5 * g_sig, 0.5 * hp.noise_variance * trace_w];
    Ok((value, grad))
}

/// Settings for [`fit_gp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            iterations: 750,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Log-space hyperparameter box, scaled to the data.
#[derive(Debug, Clone, Copy)]
struct LogBox {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl LogBox {
    fn for_data(data: &Dataset) -> Self {
        let range = data.bounds().mean_width();
        let offset = mean(data.values());
        let var = data.values().iter().map(|y| (y - offset).powi(2)).sum::<f64>()
            / data.len().max(1) as f64;
        let var = if var > 0.0 && var.is_finite() { var } else { 1.0 };
        Self {
            lo: [(1e-3 * range).ln(), (1e-6 * var).ln(), (1e-8 * var).ln()],
            hi: [(10.0 * range).ln(), (1e6 * var).ln(), var.ln()],
        }
    }

    fn clamp(&self, theta: &mut [f64; 3]) {
        for (k, t) in theta.iter_mut().enumerate() {
            *t = t.clamp(self.lo[k], self.hi[k]);
        }
    }
}

fn hyperparams_from_log(theta: &[f64; 3]) -> GpHyperparams {
    GpHyperparams {
        lengthscale: theta[0].exp(),
        signal_variance: theta[1].exp(),
        noise_variance: theta[2].exp(),
    }
}

struct RestartResult {
    hp: GpHyperparams,
    lml: f64,
}

/// Adam runs in box-normalised log coordinates `u ∈ [0, 1]³`, so the learning
/// rate is a fraction of each parameter's log-range.
fn run_restart(data: &Dataset, start: [f64; 3], bx: &LogBox, cfg: &FitConfig) -> Option<RestartResult> {
    let width: [f64; 3] = std::array::from_fn(|k| bx.hi[k] - bx.lo[k]);
    let mut u: [f64; 3] = std::array::from_fn(|k| (start[k] - bx.lo[k]) / width[k]);
    let mut theta = start;
    let mut adam = Adam::new(3, cfg.learning_rate);
    let mut current = log_marginal_likelihood(data, &hyperparams_from_log(&theta)).ok()?;
    for _ in 0..cfg.iterations {
        let (_, grad) = current;
        let grad_u: [f64; 3] = std::array::from_fn(|k| grad[k] * width[k]);
        let mut next_u = u;
        adam.ascend(&mut next_u, &grad_u);
        next_u.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let mut next: [f64; 3] = std::array::from_fn(|k| bx.lo[k] + next_u[k] * width[k]);
        bx.clamp(&mut next);
        match log_marginal_likelihood(data, &hyperparams_from_log(&next)) {
            Ok(eval) if eval.0.is_finite() => {
                theta = next;
                u = next_u;
                current = eval;
            }
            _ => break,
        }
    }
    current.0.is_finite().then(|| RestartResult {
        hp: hyperparams_from_log(&theta),
        lml: current.0,
    })
}

/// Fits hyperparameters by multistart Adam and conditions the model on `data`.
pub fn fit_gp(data: &Dataset, cfg: &FitConfig) -> Result<GpModel> {
    if data.is_empty() {
        return Err(input("cannot fit a GP to an empty dataset"));
    }
    if cfg.restarts == 0 {
        return Err(input("fit needs at least one restart"));
    }
    let bx = LogBox::for_data(data);
    let mut rng = stream_rng(cfg.seed, Stream::GpFit, data.len() as u64);
    let starts: Vec<[f64; 3]> = (0..cfg.restarts)
        .map(|_| {
            std::array::from_fn(|k| rng.gen_range(bx.lo[k]..=bx.hi[k]))
        })
        .collect();

    let results: Vec<Option<RestartResult>> = starts
        .par_iter()
        .map(|s| run_restart(data, *s, &bx, cfg))
        .collect();

    // best likelihood, lowest restart index on ties
    let best = results
        .into_iter()
        .flatten()
        .fold(None::<RestartResult>, |acc, r| match acc {
            Some(a) if a.lml >= r.lml => Some(a),
            _ => Some(r),
        })
        .ok_or_else(|| {
            Error::Numerical(format!(
                "all {} hyperparameter restarts failed to factorise",
                cfg.restarts
            ))
        })?;
    log::debug!("fit_gp: best lml {:.4} with {:?}", best.lml, best.hp);
    GpModel::new(data.clone(), best.hp)
}

/// A GP conditioned on a dataset with fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyperparams: GpHyperparams,
    train_data: Dataset,
    factor: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    mean_offset: f64,
    jitter: f64,
}

impl GpModel {
    /// Conditions on `data` with the given hyperparameters. The prior mean
    /// is the empirical mean of the observations (zero for empty data).
    pub fn new(data: Dataset, hp: GpHyperparams) -> Result<Self> {
        hp.validate()?;
        let t = data.len();
        let mean_offset = mean(data.values());
        let mut k = kernel_matrix(data.points(), &hp)?;
        for i in 0..t {
            k[(i, i)] += hp.noise_variance;
        }
        let (factor, jitter) = cholesky_jittered(&k, hp.signal_variance)?;
        let centred = DVector::from_iterator(t, data.values().iter().map(|y| y - mean_offset));
        let alpha = factor.solve(&centred);
        Ok(Self {
            hyperparams: hp,
            train_data: data,
            factor,
            alpha,
            mean_offset,
            jitter,
        })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyperparams
    }

    pub fn train_data(&self) -> &Dataset {
        &self.train_data
    }

    pub fn mean_offset(&self) -> f64 {
        self.mean_offset
    }

    pub fn dim(&self) -> usize {
        self.train_data.dim()
    }

    /// Diagonal jitter that had to be added to factorise `K + σ_n² I`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor of `K + σ_n² I` (plus jitter).
    pub fn factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Posterior mean and standard deviation of the latent function at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(input(format!(
                "query has dimension {} but model has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.predict(x))
    }

    /// Unchecked [`posterior`](Self::posterior) for hot loops.
    pub(crate) fn predict(&self, x: &[f64]) -> (f64, f64) {
        let t = self.train_data.len();
        if t == 0 {
            return (self.mean_offset, self.hyperparams.signal_variance.sqrt());
        }
        let kx = DVector::from_iterator(
            t,
            self.train_data
                .points()
                .iter()
                .map(|p| matern52(distance(p, x), &self.hyperparams)),
        );
        let mean = self.mean_offset + kx.dot(&self.alpha);
        let v = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&kx)
            .unwrap_or_else(|| DVector::zeros(t));
        let var = self.hyperparams.signal_variance - v.norm_squared();
        let std = var.max(0.0).sqrt().max(STD_FLOOR);
        (mean, std)
    }
}
