//! HTTP service for interactive optimisation sessions.
//!
//! A session walks `awaiting_selection → awaiting_observation →
//! running_proposal → awaiting_selection` until its budget is spent and it
//! becomes `finished`. Demo sessions evaluate a synthetic function
//! themselves and skip `awaiting_observation`. Each session is stored as one
//! JSON document in the data directory and is written on every transition,
//! so a restarted service resumes where it stopped.
//!
//! Endpoints:
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{problem, config?}` |
//! | GET | `/sessions`, `/sessions/{id}` | |
//! | GET | `/sessions/{id}/choices` | |
//! | POST | `/sessions/{id}/selection` | `{index}` |
//! | POST | `/sessions/{id}/override` | `{point}` |
//! | POST | `/sessions/{id}/observation` | `{y}` |
//! | GET | `/sessions/{id}/history` | |
//! | GET | `/sessions/{id}/posterior?grid=N` | |
//!
//! Errors are returned as `{code, message}` with code `not_found`,
//! `conflict`, `validation` or `internal`.

pub mod error;
pub mod session;
pub mod store;
pub mod view;

use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use egbo::rng::{derive_seed, Stream};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::Mutex;

pub use error::ApiError;
pub use session::{Session, SessionRecord, Status};
pub use store::Store;

type Entry = Arc<Mutex<Session>>;

struct Inner {
    store: Store,
    master_seed: u64,
    sessions: RwLock<HashMap<String, Entry>>,
    created: AtomicU64,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Opens the data directory, restores every stored session and resumes
    /// proposals that were interrupted. Must run inside a Tokio runtime.
    pub async fn open(dir: impl Into<PathBuf>, master_seed: u64) -> io::Result<Self> {
        let store = Store::open(dir)?;
        let records = store.load_all()?;
        let restored = tokio::task::spawn_blocking(move || {
            records
                .into_iter()
                .filter_map(|r| {
                    let id = r.id.clone();
                    match Session::restore(r) {
                        Ok(s) => Some(s),
                        Err(e) => {
                            log::warn!("cannot restore session {id}: {e}");
                            None
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .await
        .map_err(io::Error::other)?;

        let state = Self {
            inner: Arc::new(Inner {
                store,
                master_seed,
                sessions: RwLock::new(HashMap::new()),
                created: AtomicU64::new(restored.len() as u64),
            }),
        };
        for session in restored {
            let id = session.id().to_string();
            let input = session.job_input();
            let entry = Arc::new(Mutex::new(session));
            state.inner.sessions.write().unwrap().insert(id, entry.clone());
            if let Some(input) = input {
                state.spawn_job(entry, input);
            }
        }
        Ok(state)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.inner.store.dir().to_path_buf()
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/sessions", post(create_session).get(list_sessions))
            .route("/sessions/{id}", get(get_session))
            .route("/sessions/{id}/choices", get(get_choices))
            .route("/sessions/{id}/selection", post(submit_selection))
            .route("/sessions/{id}/override", post(submit_override))
            .route("/sessions/{id}/observation", post(submit_observation))
            .route("/sessions/{id}/history", get(get_history))
            .route("/sessions/{id}/posterior", get(get_posterior))
            .with_state(self.clone())
    }

    /// Writes every session to disk.
    pub async fn flush(&self) -> io::Result<()> {
        for entry in self.entries() {
            let session = entry.lock().await;
            self.inner.store.save(&session.record)?;
        }
        Ok(())
    }

    fn entries(&self) -> Vec<Entry> {
        self.inner.sessions.read().unwrap().values().cloned().collect()
    }

    fn entry(&self, id: &str) -> Result<Entry, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session with id {id}")))
    }

    fn persist(&self, session: &Session) -> Result<(), ApiError> {
        self.inner
            .store
            .save(&session.record)
            .map_err(|e| ApiError::Internal(format!("cannot persist session: {e}")))
    }

    /// Runs a proposal step off the async workers; the session lock is held
    /// only while the result is stored.
    fn spawn_job(&self, entry: Entry, input: session::JobInput) {
        let app = self.clone();
        tokio::spawn(async move {
            let output = tokio::task::spawn_blocking(move || input.run())
                .await
                .unwrap_or_else(|e| Err(egbo::Error::Numerical(format!("proposal task panicked: {e}"))));
            let mut session = entry.lock().await;
            if let Err(e) = session.complete(output).and_then(|_| app.persist(&session)) {
                log::error!("session {}: {e}", session.id());
            }
        });
    }

    /// Applies a mutation under the session lock, persists it and starts any
    /// queued proposal.
    async fn mutate<T, F>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        F: FnOnce(&mut Session) -> Result<T, ApiError>,
    {
        let entry = self.entry(id)?;
        let mut session = entry.lock().await;
        let out = f(&mut session)?;
        self.persist(&session)?;
        if let Some(input) = session.job_input() {
            self.spawn_job(entry.clone(), input);
        }
        Ok(out)
    }
}

/// Serves the API until `shutdown` resolves, then writes every session.
pub async fn serve<F>(listener: TcpListener, state: AppState, shutdown: F) -> io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, state.router())
        .with_graceful_shutdown(shutdown)
        .await?;
    state.flush().await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("bad request body: {e}")))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: session::CreateRequest = parse(&body)?;
    let ordinal = app.inner.created.fetch_add(1, Ordering::SeqCst);
    let seed = derive_seed(app.inner.master_seed, Stream::Session, ordinal);
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = tokio::task::spawn_blocking(move || Session::create(id, request, seed))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    app.persist(&session)?;
    let view = view::session_view(&session);
    let input = session.job_input();
    let entry = Arc::new(Mutex::new(session));
    app.inner
        .sessions
        .write()
        .unwrap()
        .insert(view.id.clone(), entry.clone());
    if let Some(input) = input {
        app.spawn_job(entry, input);
    }
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<view::SessionView>> {
    let mut views = Vec::new();
    for entry in app.entries() {
        views.push(view::session_view(&*entry.lock().await));
    }
    views.sort_by_key(|v| (v.created_at_ms, v.id.clone()));
    Json(views)
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<view::SessionView>, ApiError> {
    let entry = app.entry(&id)?;
    let session = entry.lock().await;
    Ok(Json(view::session_view(&session)))
}

async fn get_choices(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<view::ChoicesView>, ApiError> {
    let entry = app.entry(&id)?;
    let session = entry.lock().await;
    Ok(Json(view::choices_view(&session)?))
}

async fn get_history(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<view::HistoryView>, ApiError> {
    let entry = app.entry(&id)?;
    let session = entry.lock().await;
    Ok(Json(view::history_view(&session)))
}

async fn get_posterior(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<view::PosteriorView>, ApiError> {
    let entry = app.entry(&id)?;
    let session = entry.lock().await;
    let dim = session.bounds().dim();
    let grid = match query.get("grid") {
        Some(g) => g
            .parse::<usize>()
            .map_err(|_| ApiError::field("grid", format!("grid must be a positive integer, got {g:?}")))?,
        None => view::default_grid(dim),
    };
    let Some(state) = session.loop_state() else {
        return Err(ApiError::conflict(session.status(), "show the posterior before a model is fitted"));
    };
    Ok(Json(view::PosteriorView {
        schema_version: session::SESSION_SCHEMA_VERSION,
        dimension: dim,
        grid,
        rows: view::posterior_grid(state, grid)?,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionRequest {
    index: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideRequest {
    point: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRequest {
    y: f64,
}

async fn submit_selection(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<session::SelectionAck>, ApiError> {
    app.entry(&id)?;
    let req: SelectionRequest = parse(&body)?;
    Ok(Json(app.mutate(&id, |s| s.select(req.index)).await?))
}

async fn submit_override(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<session::SelectionAck>, ApiError> {
    app.entry(&id)?;
    let req: OverrideRequest = parse(&body)?;
    Ok(Json(app.mutate(&id, |s| s.override_point(req.point)).await?))
}

async fn submit_observation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<session::ObservationAck>, ApiError> {
    app.entry(&id)?;
    let req: ObservationRequest = parse(&body)?;
    Ok(Json(app.mutate(&id, |s| s.observe(req.y)).await?))
}
