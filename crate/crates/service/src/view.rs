//! Read-only JSON views of a session.

use egbo::acquisition::ucb;
use egbo::engine::{Choice, ChoiceSource, ParetoSummary};
use egbo::{HistoryRecord, LoopState};
use serde::Serialize;

use crate::error::ApiError;
use crate::session::{Committed, Session, Status, Summary, SESSION_SCHEMA_VERSION};

/// Default grid resolution per axis.
pub fn default_grid(dim: usize) -> usize {
    if dim == 1 {
        201
    } else {
        51
    }
}

/// Largest grid resolution per axis.
pub fn max_grid(dim: usize) -> usize {
    if dim == 1 {
        10_001
    } else {
        201
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorRow {
    pub x: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorView {
    pub schema_version: u32,
    pub dimension: usize,
    /// Points per axis; rows are in row-major order over the axes.
    pub grid: usize,
    pub rows: Vec<PosteriorRow>,
}

fn axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// Posterior mean, standard deviation and utility on a regular grid over
/// the bounds of a 1D or 2D problem.
pub fn posterior_grid(state: &LoopState, grid: usize) -> Result<Vec<PosteriorRow>, ApiError> {
    let bounds = state.bounds();
    let dim = bounds.dim();
    if dim > 2 {
        return Err(ApiError::validation(format!(
            "posterior grids are available for 1D and 2D problems, this one has {dim} dimensions"
        )));
    }
    if grid < 2 || grid > max_grid(dim) {
        return Err(ApiError::field(
            "grid",
            format!("grid must lie in [2, {}] for {dim}D problems", max_grid(dim)),
        ));
    }
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let points: Vec<Vec<f64>> = if dim == 1 {
        axis(lo[0], hi[0], grid).map(|x| vec![x]).collect()
    } else {
        axis(lo[0], hi[0], grid)
            .flat_map(|a| axis(lo[1], hi[1], grid).map(move |b| vec![a, b]))
            .collect()
    };
    let model = state.model();
    let utility = &state.config().utility;
    points
        .into_iter()
        .map(|x| {
            let (mean, std) = model.posterior(&x)?;
            let u = ucb(model, &x, utility);
            Ok(PosteriorRow {
                x,
                mean,
                std,
                utility: u,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub y: f64,
    /// `initial`, `choice` or `override`.
    pub origin: &'static str,
}

fn evaluations(session: &Session) -> Vec<Evaluation> {
    let rec = &session.record;
    let Some(state) = session.loop_state() else {
        return rec
            .initial_points
            .iter()
            .zip(&rec.initial_values)
            .map(|(x, &y)| Evaluation {
                x: x.clone(),
                y,
                origin: "initial",
            })
            .collect();
    };
    let k = state.config().initial_count();
    let data = state.dataset();
    data.points()
        .iter()
        .zip(data.values())
        .enumerate()
        .map(|(i, (x, &y))| Evaluation {
            x: x.clone(),
            y,
            origin: if i < k {
                "initial"
            } else {
                match state.history()[i - k].selection {
                    egbo::Selection::Choice(_) => "choice",
                    egbo::Selection::Override(_) => "override",
                }
            },
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Incumbent {
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub schema_version: u32,
    pub id: String,
    pub mode: &'static str,
    pub status: Status,
    pub dimension: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub p: usize,
    pub iteration: usize,
    pub evaluations: usize,
    pub max_evaluations: usize,
    pub seed: u64,
    /// Initial-design points still waiting for an outcome (external mode).
    pub required_points: Vec<Vec<f64>>,
    /// Point awaiting its observed outcome after a selection (external mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incumbent: Option<Incumbent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
}

pub fn session_view(session: &Session) -> SessionView {
    let rec = &session.record;
    let bounds = session.bounds();
    let incumbent = match session.loop_state() {
        Some(s) => {
            let (x, y) = s.incumbent();
            Some(Incumbent { x: x.to_vec(), y })
        }
        None => rec
            .initial_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &y)| Incumbent {
                x: rec.initial_points[i].clone(),
                y,
            }),
    };
    SessionView {
        schema_version: SESSION_SCHEMA_VERSION,
        id: rec.id.clone(),
        mode: if session.is_demo() { "demo" } else { "external" },
        status: rec.status,
        dimension: bounds.dim(),
        lower: bounds.lower().to_vec(),
        upper: bounds.upper().to_vec(),
        p: rec.config.p,
        iteration: session.iteration(),
        evaluations: session.evaluations(),
        max_evaluations: rec.config.max_evaluations,
        seed: rec.config.seed,
        required_points: session.remaining_initial().to_vec(),
        pending_point: rec.committed.as_ref().map(|c: &Committed| c.point.clone()),
        incumbent,
        summary: rec.summary.clone(),
        error: rec.error.clone(),
        created_at_ms: rec.created_at_ms,
        updated_at_ms: rec.updated_at_ms,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChoiceView {
    pub index: usize,
    pub point: Vec<f64>,
    pub utility: f64,
    pub predicted_mean: f64,
    pub predicted_std: f64,
    pub source: ChoiceSource,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChoicesView {
    pub schema_version: u32,
    pub iteration: usize,
    pub choices: Vec<ChoiceView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pareto_summary: Option<ParetoSummary>,
    pub evaluations: Vec<Evaluation>,
    /// Posterior samples on the default grid (1D and 2D problems only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<Vec<PosteriorRow>>,
}

pub fn choices_view(session: &Session) -> Result<ChoicesView, ApiError> {
    if session.status() != Status::AwaitingSelection {
        return Err(ApiError::conflict(session.status(), "list choices"));
    }
    let set = session.pending_choices().expect("awaiting selection without choices");
    let state = session.loop_state().expect("awaiting selection without a loop state");
    let dim = session.bounds().dim();
    let posterior = if dim <= 2 {
        Some(posterior_grid(state, default_grid(dim))?)
    } else {
        None
    };
    Ok(ChoicesView {
        schema_version: SESSION_SCHEMA_VERSION,
        iteration: set.iteration,
        choices: set
            .choices
            .iter()
            .enumerate()
            .map(|(index, c): (usize, &Choice)| ChoiceView {
                index,
                point: c.point.clone(),
                utility: c.utility,
                predicted_mean: c.predicted_mean,
                predicted_std: c.predicted_std,
                source: c.source,
            })
            .collect(),
        pareto_summary: set.pareto_summary.clone(),
        evaluations: evaluations(session),
        posterior,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryView {
    pub schema_version: u32,
    pub status: Status,
    pub evaluations: Vec<Evaluation>,
    pub iterations: Vec<HistoryRecord>,
}

pub fn history_view(session: &Session) -> HistoryView {
    HistoryView {
        schema_version: SESSION_SCHEMA_VERSION,
        status: session.status(),
        evaluations: evaluations(session),
        iterations: session
            .loop_state()
            .map(|s| s.history().to_vec())
            .unwrap_or_default(),
    }
}
