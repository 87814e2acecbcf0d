//! The expert-guided optimisation loop.
//!
//! Each iteration fits the GP, finds the utility optimum `x*`, solves the
//! bi-objective batch problem (summed utility vs. log-determinant spread)
//! over `p − 1` alternates with NSGA-II, and presents the knee alternates
//! together with `x*` as a [`ChoiceSet`]. The caller picks one, evaluates
//! it, and feeds the observation back through
//! [`LoopState::apply_selection`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    batch_utility, maximize_utility, polish_utility, ucb, variability, AcquisitionConfig,
    UtilityConfig, VARIABILITY_SENTINEL,
};
use crate::data::{Bounds, Dataset};
use crate::error::{input, Error, Result};
use crate::gp::{distance, fit_gp, FitConfig, GpModel};
use crate::lhs::latin_hypercube;
use crate::nsga2::{nsga2_traced, MooProblem, Nsga2Config, ParetoFront};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Version tag of the persisted loop document.
pub const LOOP_SCHEMA_VERSION: u32 = 1;

/// Choices closer than this (Euclidean) count as the same point.
pub const DISTINCT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceSource {
    UtilityOptimum,
    KneeAlternate,
    /// Space-filling replacement used when the front is degenerate.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub point: Vec<f64>,
    pub utility: f64,
    pub predicted_mean: f64,
    pub predicted_std: f64,
    pub source: ChoiceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSummary {
    pub front_size: usize,
    pub knee_objectives: [f64; 2],
    /// Every front member had coincident points; alternates came from LHS.
    pub degenerate: bool,
    /// Number of knee rows replaced because they collided with another choice.
    pub repaired_rows: usize,
    /// `x*` was replaced by a better utility point found among the alternates.
    pub optimum_refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSet {
    /// Zero-based index of the selection this set is offered for.
    pub iteration: usize,
    pub choices: Vec<Choice>,
    pub pareto_summary: Option<ParetoSummary>,
}

impl ChoiceSet {
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// Index of the utility-optimum choice.
    pub fn optimum_index(&self) -> usize {
        self.choices
            .iter()
            .position(|c| c.source == ChoiceSource::UtilityOptimum)
            .expect("choice set always carries the utility optimum")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Choices shown per iteration, including `x*`.
    pub p: usize,
    pub init_points: usize,
    /// Total evaluation budget, initial design included.
    pub max_evaluations: usize,
    pub seed: u64,
    pub utility: UtilityConfig,
    pub fit: FitConfig,
    pub acquisition: AcquisitionConfig,
    pub nsga2: Nsga2Config,
    /// Practitioner-supplied points evaluated alongside the initial design.
    #[serde(default)]
    pub initial_points: Vec<Vec<f64>>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            p: 4,
            init_points: 4,
            max_evaluations: 20,
            seed: 0,
            utility: UtilityConfig::default(),
            fit: FitConfig::default(),
            acquisition: AcquisitionConfig::default(),
            nsga2: Nsga2Config::default(),
            initial_points: Vec::new(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self, bounds: &Bounds) -> Result<()> {
        if self.p < 2 {
            return Err(input(format!("p must be >= 2, got {}", self.p)));
        }
        if self.init_points + self.initial_points.len() == 0 {
            return Err(input("at least one initial point is required"));
        }
        if self.max_evaluations <= self.initial_count() {
            return Err(input(format!(
                "max_evaluations ({}) must exceed the initial design size ({})",
                self.max_evaluations,
                self.initial_count()
            )));
        }
        if !(self.utility.beta >= 0.0 && self.utility.beta.is_finite()) {
            return Err(input(format!("beta must be >= 0, got {}", self.utility.beta)));
        }
        if self.acquisition.restarts == 0 {
            return Err(input("acquisition needs at least one restart"));
        }
        if self.fit.restarts == 0 {
            return Err(input("fit needs at least one restart"));
        }
        self.nsga2.validate()?;
        for (i, x) in self.initial_points.iter().enumerate() {
            if !bounds.contains(x) {
                return Err(input(format!("initial point {i} lies outside the domain")));
            }
        }
        Ok(())
    }

    pub fn initial_count(&self) -> usize {
        self.init_points + self.initial_points.len()
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig {
            seed: self.seed,
            ..self.fit.clone()
        }
    }

    fn acquisition_config(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            seed: self.seed,
            ..self.acquisition.clone()
        }
    }
}

/// Initial design: practitioner points followed by a seeded Latin hypercube.
pub fn initial_design(cfg: &LoopConfig, bounds: &Bounds) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(cfg.seed, Stream::InitialDesign, 0);
    let mut points = cfg.initial_points.clone();
    points.extend(latin_hypercube(bounds, cfg.init_points, &mut rng));
    points
}

/// What the practitioner did at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Choice(usize),
    /// A point supplied by the practitioner instead of any of the choices.
    Override(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub choices: ChoiceSet,
    pub selection: Selection,
    pub observed: f64,
}

/// Everything produced by one proposal step.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub choices: ChoiceSet,
    pub front: Option<ParetoFront>,
}

/// Loop state: data, current model and the selection history.
#[derive(Debug, Clone)]
pub struct LoopState {
    config: LoopConfig,
    dataset: Dataset,
    history: Vec<HistoryRecord>,
    model: GpModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LoopDocument {
    schema_version: u32,
    config: LoopConfig,
    dataset: Dataset,
    history: Vec<HistoryRecord>,
}

impl LoopState {
    /// Builds the state from the evaluated initial design.
    pub fn from_initial(
        config: LoopConfig,
        bounds: Bounds,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        config.validate(&bounds)?;
        if points.len() != config.initial_count() {
            return Err(input(format!(
                "expected {} initial observations, got {}",
                config.initial_count(),
                points.len()
            )));
        }
        let dataset = Dataset::from_parts(bounds, points, values)?;
        let model = fit_gp(&dataset, &config.fit_config())?;
        Ok(Self {
            config,
            dataset,
            history: Vec::new(),
            model,
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn bounds(&self) -> &Bounds {
        self.dataset.bounds()
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn evaluations(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_finished(&self) -> bool {
        self.dataset.len() >= self.config.max_evaluations
    }

    /// Best observation so far as `(point, value)`.
    pub fn incumbent(&self) -> (&[f64], f64) {
        let (i, v) = self.dataset.best().expect("initial design is never empty");
        (&self.dataset.points()[i], v)
    }

    pub fn propose_choices(&self) -> Result<ChoiceSet> {
        self.propose().map(|p| p.choices)
    }

    /// Proposal with the full Pareto front attached (for debugging dumps).
    pub fn propose(&self) -> Result<Proposal> {
        let cfg = &self.config;
        let bounds = self.bounds();
        let n = bounds.dim();
        let alternates = cfg.p - 1;
        let model = &self.model;
        let utility = &cfg.utility;
        let step = self.history.len() as u64;

        let optimum = maximize_utility(model, bounds, utility, &cfg.acquisition_config());
        let mut x_star = optimum.x;

        let batch_bounds = bounds.replicate(alternates);
        let anchor = x_star.clone();
        let problem = MooProblem::new(batch_bounds, |flat: &[f64]| {
            let rows: Vec<Vec<f64>> = flat.chunks(n).map(<[f64]>::to_vec).collect();
            [batch_utility(model, &rows, utility), variability(model, &rows, &anchor)]
        });
        let nsga_cfg = Nsga2Config {
            seed: derive_seed(cfg.seed, Stream::Nsga2, step),
            ..cfg.nsga2.clone()
        };
        let mut rng = stream_rng(cfg.seed, Stream::Fallback, step);
        let anchored_seed: Vec<f64> = (0..alternates)
            .flat_map(|_| {
                x_star
                    .iter()
                    .enumerate()
                    .map(|(d, v)| {
                        let w = bounds.width(d);
                        (v + rng.gen_range(-1e-3..1e-3) * w).clamp(bounds.lower()[d], bounds.upper()[d])
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let (front, _) = nsga2_traced(&problem, &nsga_cfg, &[anchored_seed])?;

        let degenerate = front
            .objective_values
            .iter()
            .all(|o| o[1] <= VARIABILITY_SENTINEL);
        let mut rows: Vec<Vec<f64>>;
        let mut repaired = 0;
        if degenerate {
            rows = latin_hypercube(bounds, alternates, &mut rng);
            repaired += repair_rows(&mut rows, &x_star, None, bounds);
        } else {
            rows = front.rows(front.knee_index, n);
            repaired += repair_rows(&mut rows, &x_star, Some((&front, n)), bounds);
        }

        // x* must carry the largest utility of the set; if an alternate beats
        // it the multistart missed a mode, so climb from there and swap.
        let mut refined = false;
        let u_star = ucb(model, &x_star, utility);
        if let Some((best_row, u_best)) = rows
            .iter()
            .map(|r| ucb(model, r, utility))
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        {
            if u_best > u_star {
                let polished =
                    polish_utility(model, bounds, utility, &rows[best_row], &cfg.acquisition_config());
                let new_star = if polished.value >= u_best {
                    polished.x
                } else {
                    rows[best_row].clone()
                };
                rows[best_row] = std::mem::replace(&mut x_star, new_star);
                repaired += repair_rows(&mut rows, &x_star, None, bounds);
                refined = true;
            }
        }

        let annotate = |point: Vec<f64>, source| {
            let (mean, std) = model.predict(&point);
            Choice {
                utility: mean + utility.beta * std,
                predicted_mean: mean,
                predicted_std: std,
                point,
                source,
            }
        };
        let alt_source = if degenerate {
            ChoiceSource::Fallback
        } else {
            ChoiceSource::KneeAlternate
        };
        let mut choices = vec![annotate(x_star, ChoiceSource::UtilityOptimum)];
        choices.extend(rows.into_iter().map(|r| annotate(r, alt_source)));
        // descending utility; the stable sort keeps x* first on ties
        choices.sort_by(|a, b| b.utility.total_cmp(&a.utility));

        let summary = ParetoSummary {
            front_size: front.len(),
            knee_objectives: front.objective_values[front.knee_index],
            degenerate,
            repaired_rows: repaired,
            optimum_refined: refined,
        };
        Ok(Proposal {
            choices: ChoiceSet {
                iteration: self.history.len(),
                choices,
                pareto_summary: Some(summary),
            },
            front: Some(front),
        })
    }

    /// Records the evaluation of choice `index` and refits the model.
    pub fn apply_selection(&mut self, choices: &ChoiceSet, index: usize, observed: f64) -> Result<()> {
        if index >= choices.len() {
            return Err(input(format!(
                "choice index {index} out of range for {} choices",
                choices.len()
            )));
        }
        let point = choices.choices[index].point.clone();
        self.commit(choices, Selection::Choice(index), point, observed)
    }

    /// Records the evaluation of a practitioner-supplied point instead of any choice.
    pub fn apply_override(&mut self, choices: &ChoiceSet, point: Vec<f64>, observed: f64) -> Result<()> {
        self.commit(choices, Selection::Override(point.clone()), point, observed)
    }

    fn commit(&mut self, choices: &ChoiceSet, selection: Selection, point: Vec<f64>, observed: f64) -> Result<()> {
        if self.is_finished() {
            return Err(input("evaluation budget is exhausted"));
        }
        if !observed.is_finite() {
            return Err(input(format!("observed value {observed} is not finite")));
        }
        if choices.iteration != self.history.len() {
            return Err(input(format!(
                "choice set is for iteration {} but the loop is at {}",
                choices.iteration,
                self.history.len()
            )));
        }
        let mut dataset = self.dataset.clone();
        dataset.push(point, observed)?;
        let model = fit_gp(&dataset, &self.config.fit_config())?;
        self.dataset = dataset;
        self.model = model;
        self.history.push(HistoryRecord {
            choices: choices.clone(),
            selection,
            observed,
        });
        Ok(())
    }

    /// Versioned JSON document with config, data and history.
    pub fn to_json(&self) -> Result<String> {
        let doc = LoopDocument {
            schema_version: LOOP_SCHEMA_VERSION,
            config: self.config.clone(),
            dataset: self.dataset.clone(),
            history: self.history.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| input(e.to_string()))
    }

    /// Restores a state saved by [`to_json`](Self::to_json). The model is
    /// refit deterministically from the stored data.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LoopDocument =
            serde_json::from_str(text).map_err(|e| input(format!("bad loop document: {e}")))?;
        if doc.schema_version != LOOP_SCHEMA_VERSION {
            return Err(input(format!(
                "unsupported loop schema version {}",
                doc.schema_version
            )));
        }
        let expected = doc.config.initial_count() + doc.history.len();
        if doc.dataset.len() != expected {
            return Err(input(format!(
                "dataset has {} entries, history implies {expected}",
                doc.dataset.len()
            )));
        }
        doc.config.validate(doc.dataset.bounds())?;
        let model = fit_gp(&doc.dataset, &doc.config.fit_config())?;
        Ok(Self {
            config: doc.config,
            dataset: doc.dataset,
            history: doc.history,
            model,
        })
    }

    /// Re-runs the recorded history from the initial design and checks that
    /// every choice set is reproduced exactly.
    pub fn replay(&self) -> Result<LoopState> {
        let k = self.config.initial_count();
        let mut state = LoopState::from_initial(
            self.config.clone(),
            self.bounds().clone(),
            self.dataset.points()[..k].to_vec(),
            self.dataset.values()[..k].to_vec(),
        )?;
        for (i, record) in self.history.iter().enumerate() {
            let proposed = state.propose_choices()?;
            if proposed != record.choices {
                return Err(Error::Numerical(format!(
                    "replay diverged at iteration {i}: regenerated choices differ from the record"
                )));
            }
            match &record.selection {
                Selection::Choice(idx) => state.apply_selection(&proposed, *idx, record.observed)?,
                Selection::Override(x) => state.apply_override(&proposed, x.clone(), record.observed)?,
            }
        }
        Ok(state)
    }
}

fn collides(x: &[f64], taken: &[&[f64]]) -> bool {
    taken.iter().any(|t| distance(x, t) <= DISTINCT_TOLERANCE)
}

/// Makes every row distinct from `x_star` and from earlier rows.
///
/// A colliding row is replaced by the same row of the nearest other front
/// member (decision-space distance to the knee), falling back to a small
/// deterministic perturbation. Returns the number of rows changed.
fn repair_rows(
    rows: &mut [Vec<f64>],
    x_star: &[f64],
    front: Option<(&ParetoFront, usize)>,
    bounds: &Bounds,
) -> usize {
    let mut changed = 0;
    for r in 0..rows.len() {
        let is_clash = |cand: &[f64], rows: &[Vec<f64>]| {
            let mut taken: Vec<&[f64]> = vec![x_star];
            taken.extend(rows[..r].iter().map(Vec::as_slice));
            collides(cand, &taken)
        };
        if !is_clash(&rows[r], rows) {
            continue;
        }
        changed += 1;
        let mut replacement = None;
        if let Some((front, n)) = front {
            let knee = front.knee();
            let mut order: Vec<usize> = (0..front.len()).filter(|&i| i != front.knee_index).collect();
            order.sort_by(|&a, &b| {
                distance(&front.solutions[a], knee)
                    .total_cmp(&distance(&front.solutions[b], knee))
                    .then(a.cmp(&b))
            });
            replacement = order
                .into_iter()
                .map(|i| front.solutions[i][r * n..(r + 1) * n].to_vec())
                .find(|cand| !is_clash(cand, rows));
        }
        let candidate = replacement.unwrap_or_else(|| {
            let mut k = 1.0;
            loop {
                let mut cand = rows[r].clone();
                for (d, c) in cand.iter_mut().enumerate() {
                    let step = 1e-6 * k * bounds.width(d);
                    *c = if *c + step <= bounds.upper()[d] { *c + step } else { *c - step };
                }
                if !is_clash(&cand, rows) {
                    break cand;
                }
                k += 1.0;
            }
        });
        rows[r] = candidate;
    }
    changed
}

/// Chooses among the offered choices. Implementations see only what a human
/// would see: the choice set.
pub trait Selector {
    fn select(&mut self, choices: &ChoiceSet) -> std::result::Result<usize, String>;
}

impl<F> Selector for F
where
    F: FnMut(&ChoiceSet) -> std::result::Result<usize, String>,
{
    fn select(&mut self, choices: &ChoiceSet) -> std::result::Result<usize, String> {
        self(choices)
    }
}

/// Completed or aborted run.
#[derive(Debug)]
pub struct LoopOutcome {
    pub state: Option<LoopState>,
    /// Observed values in evaluation order, initial design first.
    pub observations: Vec<f64>,
    pub error: Option<Error>,
}

impl LoopOutcome {
    pub fn into_result(self) -> Result<(LoopState, Vec<f64>)> {
        match (self.state, self.error) {
            (Some(s), None) => Ok((s, self.observations)),
            (_, Some(e)) => Err(e),
            (None, None) => Err(Error::Numerical("loop produced no state".into())),
        }
    }
}

/// Runs the full loop to the evaluation budget.
///
/// On failure the partial state and observations gathered so far are kept
/// in the outcome together with the error.
pub fn run_loop<O, S>(objective: O, selector: &mut S, cfg: &LoopConfig, bounds: &Bounds) -> LoopOutcome
where
    O: Fn(&[f64]) -> f64,
    S: Selector + ?Sized,
{
    run_loop_with(objective, selector, cfg, bounds, |_, _| {})
}

/// [`run_loop`] with a hook invoked after every proposal.
pub fn run_loop_with<O, S, H>(
    objective: O,
    selector: &mut S,
    cfg: &LoopConfig,
    bounds: &Bounds,
    mut on_proposal: H,
) -> LoopOutcome
where
    O: Fn(&[f64]) -> f64,
    S: Selector + ?Sized,
    H: FnMut(&LoopState, &Proposal),
{
    let points = initial_design(cfg, bounds);
    let observations: Vec<f64> = points.iter().map(|x| objective(x)).collect();
    let mut state = match LoopState::from_initial(cfg.clone(), bounds.clone(), points, observations.clone()) {
        Ok(s) => s,
        Err(e) => {
            return LoopOutcome {
                state: None,
                observations,
                error: Some(e),
            }
        }
    };
    let mut observations = observations;
    while !state.is_finished() {
        let mut step = || -> Result<f64> {
            let proposal = state.propose()?;
            on_proposal(&state, &proposal);
            let idx = selector.select(&proposal.choices).map_err(Error::Selector)?;
            if idx >= proposal.choices.len() {
                return Err(Error::Selector(format!("selector returned index {idx}")));
            }
            let y = objective(&proposal.choices.choices[idx].point);
            state.apply_selection(&proposal.choices, idx, y)?;
            Ok(y)
        };
        match step() {
            Ok(y) => observations.push(y),
            Err(e) => {
                return LoopOutcome {
                    state: Some(state),
                    observations,
                    error: Some(e),
                }
            }
        }
    }
    LoopOutcome {
        state: Some(state),
        observations,
        error: None,
    }
}
