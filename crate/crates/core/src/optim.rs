//! Local optimisers shared by hyperparameter training, utility maximisation
//! and true-optimum estimation.

use crate::data::Bounds;

/// Adam first-order optimiser (Kingma & Ba), used here for ascent.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    /// One ascent step on `params` along `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = if grad[i].is_finite() { grad[i] } else { 0.0 };
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] += self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiNewtonConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Central-difference step as a fraction of each coordinate's width.
    pub fd_step: f64,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-12,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Central differences, one-sided where the box forbids a symmetric stencil.
fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64, bounds: &Bounds, rel: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * bounds.width(i);
            let up = x[i] + h <= bounds.upper()[i];
            let down = x[i] - h >= bounds.lower()[i];
            let g = match (down, up) {
                (true, true) => {
                    probe[i] = x[i] + h;
                    let a = f(&probe);
                    probe[i] = x[i] - h;
                    let b = f(&probe);
                    (a - b) / (2.0 * h)
                }
                (false, true) => {
                    probe[i] = x[i] + h;
                    (f(&probe) - fx) / h
                }
                (true, false) => {
                    probe[i] = x[i] - h;
                    (fx - f(&probe)) / h
                }
                (false, false) => 0.0,
            };
            probe[i] = x[i];
            if g.is_finite() {
                g
            } else {
                0.0
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bounded quasi-Newton maximisation of `f` from `x0`.
///
/// Projected BFGS on `-f` with an inverse-Hessian approximation restricted
/// to the free variables, Armijo backtracking along the projected path and
/// finite-difference gradients. The returned point is always inside `bounds`
/// and never worse than the clipped start.
pub fn maximize_bounded<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &Bounds,
    cfg: &QuasiNewtonConfig,
) -> LocalResult {
    let n = x0.len();
    // minimise g = -f
    let g = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let fneg = |x: &[f64]| -g(x);

    let mut x = x0.to_vec();
    bounds.clip(&mut x);
    let mut gx = g(&x);
    let mut grad: Vec<f64> = fd_gradient(&fneg, &x, -gx, bounds, cfg.fd_step)
        .into_iter()
        .map(|v| -v)
        .collect();
    let mut h_inv = identity(n);
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lo = x[i] <= bounds.lower()[i];
                let at_hi = x[i] >= bounds.upper()[i];
                !((at_lo && grad[i] > 0.0) || (at_hi && grad[i] < 0.0))
            })
            .collect();
        let g_free: Vec<f64> = (0..n).map(|i| if free[i] { grad[i] } else { 0.0 }).collect();
        let pg_norm = g_free.iter().map(|v| v * v).sum::<f64>().sqrt();
        if pg_norm <= cfg.tolerance {
            break;
        }

        let mut dir: Vec<f64> = (0..n)
            .map(|i| if free[i] { -dot(&h_inv[i], &g_free) } else { 0.0 })
            .collect();
        if dot(&dir, &g_free) >= 0.0 {
            h_inv = identity(n);
            fresh = true;
            dir = g_free.iter().map(|v| -v).collect();
        }

        let accepted = line_search(&g, &x, gx, &grad, &dir, bounds);
        let (x_new, g_new) = match accepted {
            Some(v) => v,
            None if !fresh => {
                h_inv = identity(n);
                fresh = true;
                continue;
            }
            None => break,
        };

        let grad_new: Vec<f64> = fd_gradient(&fneg, &x_new, -g_new, bounds, cfg.fd_step)
            .into_iter()
            .map(|v| -v)
            .collect();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > 1e-12 * s_norm * y_norm && sy > 0.0 {
            if fresh {
                // Shanno–Phua scaling of the initial approximation
                let scale = sy / dot(&y, &y);
                for (i, row) in h_inv.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h_inv, &s, &y, sy);
            fresh = false;
        }

        let improvement = gx - g_new;
        x = x_new;
        gx = g_new;
        grad = grad_new;
        if improvement <= cfg.tolerance * gx.abs().max(1.0) {
            break;
        }
    }

    LocalResult {
        x,
        value: -gx,
        iterations,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row
        })
        .collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn line_search<G: Fn(&[f64]) -> f64>(
    g: &G,
    x: &[f64],
    gx: f64,
    grad: &[f64],
    dir: &[f64],
    bounds: &Bounds,
) -> Option<(Vec<f64>, f64)> {
    let mut step = 1.0;
    for _ in 0..50 {
        let mut cand: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        bounds.clip(&mut cand);
        let moved: Vec<f64> = cand.iter().zip(x).map(|(a, b)| a - b).collect();
        if moved.iter().all(|m| *m == 0.0) {
            return None;
        }
        let val = g(&cand);
        if val <= gx + 1e-4 * dot(grad, &moved) && val < gx {
            return Some((cand, val));
        }
        step *= 0.5;
    }
    None
}
