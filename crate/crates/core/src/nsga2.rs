//! Bi-objective NSGA-II (Deb et al., 2002) with both objectives maximised,
//! plus knee-point selection on the resulting front.
//!
//! Each generation breeds `offspring_per_gen` children by binary crowded
//! tournament and SBX crossover, applies `mutations_per_gen` single-coordinate
//! polynomial mutations to randomly chosen children, then truncates
//! parents ∪ children back to the population size by rank and crowding.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Bounds;
use crate::error::{input, Result};
use crate::lhs::latin_hypercube;
use crate::rng::{stream_rng, Stream};

/// Decision vectors closer than this (max-abs) are treated as duplicates.
pub const DEDUP_TOLERANCE: f64 = 1e-9;

/// Ties in knee distance below this are resolved by the tie-break rule.
const KNEE_TIE: f64 = 1e-12;

/// A box-constrained problem with two maximised objectives.
pub struct MooProblem<F> {
    bounds: Bounds,
    objectives: F,
}

impl<F> MooProblem<F>
where
    F: Fn(&[f64]) -> [f64; 2] + Sync,
{
    pub fn new(bounds: Bounds, objectives: F) -> Self {
        Self { bounds, objectives }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Objective values with NaN mapped to −∞.
    pub fn evaluate(&self, x: &[f64]) -> [f64; 2] {
        let mut v = (self.objectives)(x);
        for o in &mut v {
            if o.is_nan() {
                *o = f64::NEG_INFINITY;
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Config {
    pub population: usize,
    pub generations: usize,
    pub offspring_per_gen: usize,
    pub crossover_prob: f64,
    pub mutations_per_gen: usize,
    pub sbx_eta: f64,
    pub mutation_eta: f64,
    pub seed: u64,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 150,
            offspring_per_gen: 30,
            crossover_prob: 0.9,
            mutations_per_gen: 20,
            sbx_eta: 15.0,
            mutation_eta: 20.0,
            seed: 0,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(input(format!("population must be >= 4, got {}", self.population)));
        }
        if self.offspring_per_gen < 2 || !self.offspring_per_gen.is_multiple_of(2) {
            return Err(input(format!(
                "offspring_per_gen must be even and >= 2, got {}",
                self.offspring_per_gen
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(input(format!(
                "crossover_prob must lie in [0, 1], got {}",
                self.crossover_prob
            )));
        }
        if !(self.sbx_eta > 0.0 && self.mutation_eta > 0.0) {
            return Err(input("distribution indices must be positive"));
        }
        Ok(())
    }
}

/// Final non-dominated set of an NSGA-II run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Flattened decision vectors.
    pub solutions: Vec<Vec<f64>>,
    pub objective_values: Vec<[f64; 2]>,
    pub knee_index: usize,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn knee(&self) -> &[f64] {
        &self.solutions[self.knee_index]
    }

    /// Splits solution `i` into rows of width `n`.
    pub fn rows(&self, i: usize, n: usize) -> Vec<Vec<f64>> {
        self.solutions[i].chunks(n).map(<[f64]>::to_vec).collect()
    }
}

/// Per-generation summary used to check elitism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_first: f64,
    pub best_second: f64,
    pub front_size: usize,
}

fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// Fast non-dominated sort; fronts in rank order, indices ascending within each.
pub fn non_dominated_sort(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let pts: Vec<[f64; 2]> = points
        .iter()
        .map(|p| p.map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v }))
        .collect();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&pts[i], &pts[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&pts[j], &pts[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of a front.
pub fn crowding_distance(front: &[[f64; 2]]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    #[allow(clippy::needless_range_loop)]
    for m in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = front[order[n - 1]][m] - front[order[0]][m];
        if !(range > 0.0 && range.is_finite()) {
            continue;
        }
        for k in 1..n - 1 {
            let gap = front[order[k + 1]][m] - front[order[k - 1]][m];
            if gap.is_finite() {
                dist[order[k]] += gap / range;
            }
        }
    }
    dist
}

/// Knee of a front: the member furthest from the chord joining the two
/// extreme members after min-max normalising both objectives.
///
/// Fronts of one or two members return the larger first objective. Ties go
/// to the larger first objective, then to the lower index.
pub fn knee_point(objectives: &[[f64; 2]]) -> usize {
    assert!(!objectives.is_empty(), "knee of an empty front");
    let by_first = |a: usize, b: usize| -> usize {
        match objectives[a][0].total_cmp(&objectives[b][0]) {
            Ordering::Less => b,
            Ordering::Greater => a,
            Ordering::Equal => a.min(b),
        }
    };
    let best_first = (0..objectives.len()).reduce(by_first).unwrap();
    if objectives.len() <= 2 {
        return best_first;
    }

    let normalised: Vec<[f64; 2]> = {
        let mut out = vec![[0.0; 2]; objectives.len()];
        for m in 0..2 {
            let lo = objectives.iter().map(|o| o[m]).fold(f64::INFINITY, f64::min);
            let hi = objectives.iter().map(|o| o[m]).fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            for (o, v) in out.iter_mut().zip(objectives) {
                o[m] = if range > 0.0 && range.is_finite() && v[m].is_finite() {
                    (v[m] - lo) / range
                } else {
                    0.0
                };
            }
        }
        out
    };

    // extremes: best in each objective (first objective ties by lower index)
    let a = best_first;
    let b = (0..objectives.len())
        .reduce(|x, y| match objectives[x][1].total_cmp(&objectives[y][1]) {
            Ordering::Less => y,
            Ordering::Greater => x,
            Ordering::Equal => x.min(y),
        })
        .unwrap();
    let (pa, pb) = (normalised[a], normalised[b]);
    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
    let chord = (dx * dx + dy * dy).sqrt();

    let distance = |i: usize| -> f64 {
        if chord == 0.0 {
            return 0.0;
        }
        let p = normalised[i];
        ((p[0] - pa[0]) * dy - (p[1] - pa[1]) * dx).abs() / chord
    };

    let mut best = 0;
    let mut best_d = distance(0);
    for i in 1..objectives.len() {
        let d = distance(i);
        if d > best_d + KNEE_TIE {
            best = i;
            best_d = d;
        } else if (d - best_d).abs() <= KNEE_TIE && objectives[i][0] > objectives[best][0] {
            best = i;
            best_d = best_d.max(d);
        }
    }
    best
}

/// Area dominated by `points` relative to `reference` (both objectives maximised).
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] > reference[0] && p[1] > reference[1])
        .collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut covered = reference[1];
    for p in pts {
        if p[1] > covered {
            area += (p[0] - reference[0]) * (p[1] - covered);
            covered = p[1];
        }
    }
    area
}

#[derive(Debug, Clone)]
struct Individual {
    x: Vec<f64>,
    obj: [f64; 2],
    rank: usize,
    crowd: f64,
}

fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowd > b.crowd)
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut ChaCha8Rng) -> &'a Individual {
    let i = rng.gen_range(0..pop.len());
    let j = rng.gen_range(0..pop.len());
    if crowded_better(&pop[j], &pop[i]) {
        &pop[j]
    } else {
        &pop[i]
    }
}

fn sbx_beta_q(rand: f64, beta: f64, eta: f64) -> f64 {
    let alpha = 2.0 - beta.powf(-(eta + 1.0));
    if rand <= 1.0 / alpha {
        (rand * alpha).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 - rand * alpha)).powf(1.0 / (eta + 1.0))
    }
}

/// Bounded simulated binary crossover.
fn sbx(
    p1: &[f64],
    p2: &[f64],
    bounds: &Bounds,
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        let swap_var: f64 = rng.gen();
        let rand: f64 = rng.gen();
        let swap_child: f64 = rng.gen();
        if swap_var > 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        let span = y2 - y1;
        let bq1 = sbx_beta_q(rand, 1.0 + 2.0 * (y1 - lo) / span, eta);
        let bq2 = sbx_beta_q(rand, 1.0 + 2.0 * (hi - y2) / span, eta);
        let mut a = (0.5 * ((y1 + y2) - bq1 * span)).clamp(lo, hi);
        let mut b = (0.5 * ((y1 + y2) + bq2 * span)).clamp(lo, hi);
        if swap_child < 0.5 {
            std::mem::swap(&mut a, &mut b);
        }
        c1[i] = a;
        c2[i] = b;
    }
    (c1, c2)
}

/// Bounded polynomial mutation of a single coordinate.
fn polynomial_mutation(x: &mut [f64], i: usize, bounds: &Bounds, eta: f64, rng: &mut ChaCha8Rng) {
    let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
    let width = hi - lo;
    let y = x[i];
    let d1 = (y - lo) / width;
    let d2 = (hi - y) / width;
    let r: f64 = rng.gen();
    let pow = 1.0 / (eta + 1.0);
    let dq = if r < 0.5 {
        let xy = 1.0 - d1;
        let val = 2.0 * r + (1.0 - 2.0 * r) * xy.powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let xy = 1.0 - d2;
        let val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * xy.powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    x[i] = (y + dq * width).clamp(lo, hi);
}

fn evaluate_all<F>(problem: &MooProblem<F>, xs: Vec<Vec<f64>>) -> Vec<Individual>
where
    F: Fn(&[f64]) -> [f64; 2] + Sync,
{
    xs.into_par_iter()
        .map(|x| {
            let obj = problem.evaluate(&x);
            Individual {
                x,
                obj,
                rank: 0,
                crowd: 0.0,
            }
        })
        .collect()
}

/// Ranks and crowds `pool`, then keeps the best `size` members.
fn environmental_selection(pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let objs: Vec<[f64; 2]> = pool.iter().map(|p| p.obj).collect();
    let fronts = non_dominated_sort(&objs);
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    let mut next = Vec::with_capacity(size);
    for (rank, front) in fronts.iter().enumerate() {
        if next.len() >= size {
            break;
        }
        let front_objs: Vec<[f64; 2]> = front.iter().map(|&i| objs[i]).collect();
        let crowd = crowding_distance(&front_objs);
        let mut members: Vec<(usize, f64)> = front.iter().copied().zip(crowd).collect();
        if next.len() + members.len() > size {
            members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            members.truncate(size - next.len());
            members.sort_by_key(|m| m.0);
        }
        for (i, c) in members {
            let mut ind = slots[i].take().expect("each index used once");
            ind.rank = rank;
            ind.crowd = c;
            next.push(ind);
        }
    }
    next
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    GenerationStats {
        generation,
        best_first: pop.iter().map(|p| p.obj[0]).fold(f64::NEG_INFINITY, f64::max),
        best_second: pop.iter().map(|p| p.obj[1]).fold(f64::NEG_INFINITY, f64::max),
        front_size: pop.iter().filter(|p| p.rank == 0).count(),
    }
}

/// Runs NSGA-II from a Latin-hypercube population.
pub fn nsga2<F>(problem: &MooProblem<F>, cfg: &Nsga2Config) -> Result<ParetoFront>
where
    F: Fn(&[f64]) -> [f64; 2] + Sync,
{
    nsga2_traced(problem, cfg, &[]).map(|(front, _)| front)
}

/// Runs NSGA-II with `seeds` replacing the first members of the initial
/// population, and returns per-generation statistics alongside the front.
pub fn nsga2_traced<F>(
    problem: &MooProblem<F>,
    cfg: &Nsga2Config,
    seeds: &[Vec<f64>],
) -> Result<(ParetoFront, Vec<GenerationStats>)>
where
    F: Fn(&[f64]) -> [f64; 2] + Sync,
{
    cfg.validate()?;
    let bounds = problem.bounds();
    let dim = problem.dimension();
    if let Some(s) = seeds.iter().find(|s| s.len() != dim) {
        return Err(input(format!(
            "seed individual has {} variables, problem has {dim}",
            s.len()
        )));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Nsga2, 0);

    let mut initial = latin_hypercube(bounds, cfg.population, &mut rng);
    for (slot, seed) in initial.iter_mut().zip(seeds) {
        let mut s = seed.clone();
        bounds.clip(&mut s);
        *slot = s;
    }
    let mut population = environmental_selection(evaluate_all(problem, initial), cfg.population);
    let mut trace = vec![stats(0, &population)];

    for generation in 1..=cfg.generations {
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(cfg.offspring_per_gen);
        while children.len() < cfg.offspring_per_gen {
            let a = tournament(&population, &mut rng).x.clone();
            let b = tournament(&population, &mut rng).x.clone();
            let roll: f64 = rng.gen();
            let (c1, c2) = if roll < cfg.crossover_prob {
                sbx(&a, &b, bounds, cfg.sbx_eta, &mut rng)
            } else {
                (a, b)
            };
            children.push(c1);
            children.push(c2);
        }
        for _ in 0..cfg.mutations_per_gen {
            let who = rng.gen_range(0..children.len());
            let coord = rng.gen_range(0..dim);
            polynomial_mutation(&mut children[who], coord, bounds, cfg.mutation_eta, &mut rng);
        }
        let mut pool = population;
        pool.extend(evaluate_all(problem, children));
        population = environmental_selection(pool, cfg.population);
        trace.push(stats(generation, &population));
    }

    let mut solutions: Vec<Vec<f64>> = Vec::new();
    let mut objective_values = Vec::new();
    for ind in population.into_iter().filter(|p| p.rank == 0) {
        let duplicate = solutions.iter().any(|s: &Vec<f64>| {
            s.iter()
                .zip(&ind.x)
                .all(|(a, b)| (a - b).abs() <= DEDUP_TOLERANCE)
        });
        if !duplicate {
            solutions.push(ind.x);
            objective_values.push(ind.obj);
        }
    }
    let knee_index = knee_point(&objective_values);
    Ok((
        ParetoFront {
            solutions,
            objective_values,
            knee_index,
        },
        trace,
    ))
}
