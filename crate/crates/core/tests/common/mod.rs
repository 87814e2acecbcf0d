//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical code: kernels, solves and
//! dominance checks are written out longhand on plain vectors.

#![allow(dead_code)]

use rand::Rng;

/// Matérn 5/2 written directly from the closed form.
pub fn matern(d: f64, lengthscale: f64, signal: f64) -> f64 {
    let a = 5f64.sqrt() * d / lengthscale;
    signal * (1.0 + a + 5.0 * d * d / (3.0 * lengthscale * lengthscale)) * (-a).exp()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

pub fn brute_kernel(points: &[Vec<f64>], lengthscale: f64, signal: f64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = matern(euclid(&points[i], &points[j]), lengthscale, signal);
        }
    }
    k
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    inv
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(c, p);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            let (top, bottom) = a.split_at_mut(r);
            for (dst, src) in bottom[0][c..n].iter_mut().zip(&top[c][c..n]) {
                *dst -= f * src;
            }
        }
    }
    det
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Textbook GP posterior with an explicit inverse of `K + diag·I`.
pub fn dense_posterior(
    points: &[Vec<f64>],
    values: &[f64],
    lengthscale: f64,
    signal: f64,
    diag: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = points.len();
    let offset = values.iter().sum::<f64>() / n as f64;
    let mut k = brute_kernel(points, lengthscale, signal);
    for (i, row) in k.iter_mut().enumerate() {
        row[i] += diag;
    }
    let kinv = invert(&k);
    let kx: Vec<f64> = points.iter().map(|p| matern(euclid(p, x), lengthscale, signal)).collect();
    let centred: Vec<f64> = values.iter().map(|v| v - offset).collect();
    let mean = offset + dot(&kx, &mat_vec(&kinv, &centred));
    let var = signal - dot(&kx, &mat_vec(&kinv, &kx));
    (mean, var.max(0.0).sqrt().max(1e-12))
}

/// Log marginal likelihood from the dense inverse and determinant.
pub fn dense_lml(points: &[Vec<f64>], values: &[f64], lengthscale: f64, signal: f64, noise: f64) -> f64 {
    let n = points.len();
    let offset = values.iter().sum::<f64>() / n as f64;
    let mut k = brute_kernel(points, lengthscale, signal);
    for (i, row) in k.iter_mut().enumerate() {
        row[i] += noise;
    }
    let centred: Vec<f64> = values.iter().map(|v| v - offset).collect();
    let quad = dot(&centred, &mat_vec(&invert(&k), &centred));
    -0.5 * quad - 0.5 * determinant(&k).ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// Fronts by repeatedly peeling the set of undominated survivors.
pub fn brute_fronts(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Indices of the non-dominated members.
pub fn pareto_set(points: &[[f64; 2]]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !(0..points.len()).any(|j| dominates(&points[j], &points[i])))
        .collect()
}

pub fn random_points<R: Rng>(rng: &mut R, count: usize, dim: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}

/// Perpendicular-distance knee written from scratch: normalise, measure the
/// distance of every member to the chord between the two extremes.
pub fn knee_distances(front: &[[f64; 2]]) -> Vec<f64> {
    let lo0 = front.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi0 = front.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let lo1 = front.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let hi1 = front.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let norm: Vec<(f64, f64)> = front
        .iter()
        .map(|p| ((p[0] - lo0) / (hi0 - lo0), (p[1] - lo1) / (hi1 - lo1)))
        .collect();
    let a = norm.iter().copied().max_by(|x, y| x.0.total_cmp(&y.0)).unwrap();
    let b = norm.iter().copied().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    norm.iter()
        .map(|p| ((b.0 - a.0) * (a.1 - p.1) - (a.0 - p.0) * (b.1 - a.1)).abs() / len)
        .collect()
}
