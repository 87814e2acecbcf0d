//! Session records and their status machine. Nothing in here touches the
//! network or the file system.

use std::fmt;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use egbo::acquisition::UtilityConfig;
use egbo::benchmark::{from_spec, regret, FunctionSpec, RegretTrace, TestFunction};
use egbo::{initial_design, Bounds, ChoiceSet, LoopConfig, LoopState, Selection};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const SESSION_SCHEMA_VERSION: u32 = 1;

/// Largest anchor set accepted for a demo function.
const MAX_DEMO_ANCHORS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingSelection,
    AwaitingObservation,
    RunningProposal,
    Finished,
    /// A proposal step failed; the message is kept in the record.
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::AwaitingSelection => "awaiting_selection",
            Status::AwaitingObservation => "awaiting_observation",
            Status::RunningProposal => "running_proposal",
            Status::Finished => "finished",
            Status::Failed => "failed",
        })
    }
}

/// Where observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Problem {
    /// A synthetic function evaluated by the service itself.
    Demo { function: FunctionSpec },
    /// The practitioner runs each experiment and reports the outcome.
    External { lower: Vec<f64>, upper: Vec<f64> },
}

/// Loop settings a client may override; everything else uses the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigRequest {
    pub p: Option<usize>,
    pub init_points: Option<usize>,
    pub max_evaluations: Option<usize>,
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub initial_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub problem: Problem,
    #[serde(default)]
    pub config: ConfigRequest,
}

/// Work to do while the session sits in `running_proposal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Job {
    /// Fit the first model on the initial design.
    Initial,
    /// Record an observation for the pending choice set.
    Apply { selection: Selection, observed: f64 },
}

/// A point the practitioner has committed to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committed {
    pub selection: Selection,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub best_point: Vec<f64>,
    pub best_y: f64,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<RegretTrace>,
}

/// The persisted form of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub id: String,
    pub problem: Problem,
    pub config: LoopConfig,
    pub status: Status,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub initial_points: Vec<Vec<f64>>,
    pub initial_values: Vec<f64>,
    /// Last committed loop document.
    pub loop_state: Option<serde_json::Value>,
    /// The pending choice set while awaiting a selection or observation.
    pub choices: Option<ChoiceSet>,
    pub committed: Option<Committed>,
    pub job: Option<Job>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionAck {
    pub status: Status,
    pub iteration: usize,
    pub point: Vec<f64>,
    /// Set in demo mode, where the service evaluates the point itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservationAck {
    pub status: Status,
    pub evaluations: usize,
    /// Initial-design points still waiting for an outcome.
    pub remaining_initial: usize,
}

/// Everything a proposal step needs, detached from the session lock.
pub struct JobInput {
    job: Job,
    state: Option<LoopState>,
    choices: Option<ChoiceSet>,
    config: LoopConfig,
    bounds: Bounds,
    initial_points: Vec<Vec<f64>>,
    initial_values: Vec<f64>,
}

pub type JobOutput = Result<(LoopState, Option<ChoiceSet>), egbo::Error>;

impl JobInput {
    /// Applies the job and proposes the next choice set unless the budget is spent.
    pub fn run(self) -> JobOutput {
        let state = match self.job {
            Job::Initial => {
                LoopState::from_initial(self.config, self.bounds, self.initial_points, self.initial_values)?
            }
            Job::Apply { selection, observed } => {
                let mut state = self.state.expect("apply job without a loop state");
                let choices = self.choices.expect("apply job without choices");
                match selection {
                    Selection::Choice(i) => state.apply_selection(&choices, i, observed)?,
                    Selection::Override(x) => state.apply_override(&choices, x, observed)?,
                }
                state
            }
        };
        if state.is_finished() {
            return Ok((state, None));
        }
        let next = state.propose_choices()?;
        Ok((state, Some(next)))
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// A live session: the record plus the objects rebuilt from it.
pub struct Session {
    pub record: SessionRecord,
    state: Option<LoopState>,
    function: Option<Arc<TestFunction>>,
    bounds: Bounds,
}

fn build_function(spec: &FunctionSpec) -> Result<TestFunction, ApiError> {
    if let FunctionSpec::GpSample { anchors, .. } = spec {
        if *anchors > MAX_DEMO_ANCHORS {
            return Err(ApiError::field(
                "problem.function.anchors",
                format!("at most {MAX_DEMO_ANCHORS} anchors are supported"),
            ));
        }
    }
    from_spec(spec).map_err(|e| ApiError::field("problem.function", e.to_string()))
}

impl Session {
    /// Validates a create request and builds the session. Demo sessions
    /// evaluate their initial design here and start in `running_proposal`;
    /// external sessions wait for those observations.
    pub fn create(id: String, request: CreateRequest, default_seed: u64) -> Result<Self, ApiError> {
        let (bounds, function) = match &request.problem {
            Problem::External { lower, upper } => {
                let bounds = Bounds::new(lower.clone(), upper.clone())
                    .map_err(|e| ApiError::field("problem", e.to_string()))?;
                (bounds, None)
            }
            Problem::Demo { function } => {
                let f = build_function(function)?;
                (f.bounds.clone(), Some(Arc::new(f)))
            }
        };
        let req = request.config;
        let defaults = LoopConfig::default();
        let config = LoopConfig {
            p: req.p.unwrap_or(defaults.p),
            init_points: req.init_points.unwrap_or(defaults.init_points),
            max_evaluations: req.max_evaluations.unwrap_or(defaults.max_evaluations),
            seed: req.seed.unwrap_or(default_seed),
            utility: UtilityConfig {
                beta: req.beta.unwrap_or(defaults.utility.beta),
            },
            initial_points: req.initial_points,
            ..defaults
        };
        for (i, x) in config.initial_points.iter().enumerate() {
            if x.len() != bounds.dim() {
                return Err(ApiError::field(
                    "config.initial_points",
                    format!("point {i} has {} coordinates, expected {}", x.len(), bounds.dim()),
                ));
            }
        }
        config
            .validate(&bounds)
            .map_err(|e| ApiError::field("config", e.to_string()))?;

        let initial_points = initial_design(&config, &bounds);
        let (status, initial_values, job) = match &function {
            Some(f) => {
                let values = initial_points.iter().map(|x| f.evaluate(x)).collect();
                (Status::RunningProposal, values, Some(Job::Initial))
            }
            None => (Status::AwaitingObservation, Vec::new(), None),
        };
        let now = now_ms();
        Ok(Self {
            record: SessionRecord {
                schema_version: SESSION_SCHEMA_VERSION,
                id,
                problem: request.problem,
                config,
                status,
                created_at_ms: now,
                updated_at_ms: now,
                initial_points,
                initial_values,
                loop_state: None,
                choices: None,
                committed: None,
                job,
                summary: None,
                error: None,
            },
            state: None,
            function,
            bounds,
        })
    }

    /// Rebuilds a session from its persisted record.
    pub fn restore(record: SessionRecord) -> Result<Self, ApiError> {
        if record.schema_version != SESSION_SCHEMA_VERSION {
            return Err(ApiError::validation(format!(
                "unsupported session schema version {}",
                record.schema_version
            )));
        }
        let (bounds, function) = match &record.problem {
            Problem::External { lower, upper } => (Bounds::new(lower.clone(), upper.clone())?, None),
            Problem::Demo { function } => {
                let f = build_function(function)?;
                (f.bounds.clone(), Some(Arc::new(f)))
            }
        };
        let state = match &record.loop_state {
            Some(doc) => Some(LoopState::from_json(&doc.to_string())?),
            None => None,
        };
        Ok(Self {
            record,
            state,
            function,
            bounds,
        })
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn status(&self) -> Status {
        self.record.status
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn loop_state(&self) -> Option<&LoopState> {
        self.state.as_ref()
    }

    pub fn is_demo(&self) -> bool {
        self.function.is_some()
    }

    pub fn evaluations(&self) -> usize {
        match &self.state {
            Some(s) => s.evaluations(),
            None => self.record.initial_values.len(),
        }
    }

    pub fn iteration(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.history().len())
    }

    fn touch(&mut self) {
        self.record.updated_at_ms = now_ms();
    }

    fn require(&self, status: Status, action: &str) -> Result<(), ApiError> {
        if self.record.status == status {
            Ok(())
        } else {
            Err(ApiError::conflict(self.record.status, action))
        }
    }

    /// Snapshot for a proposal step, if one is queued.
    pub fn job_input(&self) -> Option<JobInput> {
        let job = self.record.job.clone()?;
        Some(JobInput {
            job,
            state: self.state.clone(),
            choices: self.record.choices.clone(),
            config: self.record.config.clone(),
            bounds: self.bounds.clone(),
            initial_points: self.record.initial_points.clone(),
            initial_values: self.record.initial_values.clone(),
        })
    }

    fn commit(&mut self, committed: Committed) -> Result<SelectionAck, ApiError> {
        let iteration = self.iteration();
        let point = committed.point.clone();
        let observed = match &self.function {
            Some(f) => {
                let y = f.evaluate(&point);
                self.record.job = Some(Job::Apply {
                    selection: committed.selection,
                    observed: y,
                });
                self.record.status = Status::RunningProposal;
                Some(y)
            }
            None => {
                self.record.committed = Some(committed);
                self.record.status = Status::AwaitingObservation;
                None
            }
        };
        self.touch();
        Ok(SelectionAck {
            status: self.record.status,
            iteration,
            point,
            observed,
        })
    }

    pub fn select(&mut self, index: usize) -> Result<SelectionAck, ApiError> {
        self.require(Status::AwaitingSelection, "submit a selection")?;
        let choices = self.record.choices.as_ref().expect("awaiting selection without choices");
        let Some(choice) = choices.choices.get(index) else {
            return Err(ApiError::field(
                "index",
                format!("index {index} out of range for {} choices", choices.len()),
            ));
        };
        let point = choice.point.clone();
        self.commit(Committed {
            selection: Selection::Choice(index),
            point,
        })
    }

    /// Evaluates a practitioner-supplied point instead of any choice.
    pub fn override_point(&mut self, point: Vec<f64>) -> Result<SelectionAck, ApiError> {
        self.require(Status::AwaitingSelection, "submit an override")?;
        if point.len() != self.bounds.dim() || !self.bounds.contains(&point) {
            return Err(ApiError::field("point", "point must lie inside the bounds"));
        }
        self.commit(Committed {
            selection: Selection::Override(point.clone()),
            point,
        })
    }

    pub fn observe(&mut self, y: f64) -> Result<ObservationAck, ApiError> {
        self.require(Status::AwaitingObservation, "submit an observation")?;
        if !y.is_finite() {
            return Err(ApiError::field("y", "observation must be finite"));
        }
        if self.state.is_none() {
            self.record.initial_values.push(y);
            if self.record.initial_values.len() == self.record.initial_points.len() {
                self.record.job = Some(Job::Initial);
                self.record.status = Status::RunningProposal;
            }
        } else {
            let committed = self.record.committed.take().expect("awaiting observation without a point");
            self.record.job = Some(Job::Apply {
                selection: committed.selection,
                observed: y,
            });
            self.record.status = Status::RunningProposal;
        }
        self.touch();
        Ok(ObservationAck {
            status: self.record.status,
            evaluations: self.evaluations() + usize::from(self.state.is_some()),
            remaining_initial: self.remaining_initial().len(),
        })
    }

    /// Initial-design points still waiting for an outcome (external mode).
    pub fn remaining_initial(&self) -> &[Vec<f64>] {
        if self.state.is_some() || self.record.job.is_some() {
            return &[];
        }
        &self.record.initial_points[self.record.initial_values.len()..]
    }

    /// Stores the result of a proposal step.
    pub fn complete(&mut self, output: JobOutput) -> Result<(), ApiError> {
        self.record.job = None;
        match output {
            Ok((state, next)) => {
                let doc = state.to_json()?;
                self.record.loop_state =
                    Some(serde_json::from_str(&doc).map_err(|e| ApiError::Internal(e.to_string()))?);
                self.record.status = if next.is_some() {
                    Status::AwaitingSelection
                } else {
                    Status::Finished
                };
                self.record.choices = next;
                self.state = Some(state);
                if self.record.status == Status::Finished {
                    self.record.summary = Some(self.summary());
                }
            }
            Err(e) => {
                log::error!("session {}: proposal failed: {e}", self.record.id);
                self.record.status = Status::Failed;
                self.record.error = Some(e.to_string());
            }
        }
        self.touch();
        Ok(())
    }

    fn summary(&self) -> Summary {
        let state = self.state.as_ref().expect("summary needs a loop state");
        let (best_point, best_y) = state.incumbent();
        let true_max = self.function.as_ref().map(|f| f.true_max);
        Summary {
            best_point: best_point.to_vec(),
            best_y,
            evaluations: state.evaluations(),
            true_max,
            regret: true_max.and_then(|m| regret(state.dataset().values(), m).ok()),
        }
    }

    /// Choice set the practitioner is currently deciding on.
    pub fn pending_choices(&self) -> Option<&ChoiceSet> {
        self.record.choices.as_ref()
    }
}
