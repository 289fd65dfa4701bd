//! HTTP service hosting live ladder searches.
//!
//! Request/response endpoints create, patch, inspect and export sessions;
//! `GET /sessions/{id}/events` streams line-delimited JSON events in order.

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{stream, StreamExt};
use mll_core::export::{ladder_json, realization_csv, realization_svg, Provenance};
use mll_core::family::{registry, registry_entry, FamilySpec};
use mll_core::optimizer::RNG_ID;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

pub use error::{ApiError, ApiResult};
pub use session::{
    Ack, CreateRequest, Event, EventKind, LiveConfig, Patch, Session, SessionRecord, Status,
};

/// Session table shared by all handlers.
#[derive(Debug, Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    runs_dir: Option<PathBuf>,
}

impl AppState {
    /// Finished and deleted sessions persist their records under `runs_dir`.
    pub fn new(runs_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            sessions: RwLock::default(),
            runs_dir,
        })
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.sessions
            .read()
            .unwrap_or_else(std::sync::PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.into()))
    }

    /// Stop every worker; used on shutdown.
    pub fn stop_all(&self) {
        let all: Vec<Arc<Session>> = self
            .sessions
            .write()
            .unwrap_or_else(std::sync::PoisonError::into_inner)
            .drain()
            .map(|(_, s)| s)
            .collect();
        for s in all {
            s.stop();
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/families", get(list_families))
        .route("/sessions", get(list_sessions).post(create_session))
        .route(
            "/sessions/{id}",
            get(session_status)
                .patch(patch_session)
                .delete(delete_session),
        )
        .route("/sessions/{id}/export", get(export_session))
        .route("/sessions/{id}/events", get(stream_events))
        .with_state(state)
}

/// Bind `addr` and serve until ctrl-c.
pub async fn serve(addr: SocketAddr, runs_dir: Option<PathBuf>) -> std::io::Result<()> {
    let state = AppState::new(runs_dir);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::clone(&state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    tokio::task::spawn_blocking(move || state.stop_all())
        .await
        .map_err(std::io::Error::other)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct FamilySummary {
    name: String,
    notation: String,
    k: usize,
    l: usize,
    spec: FamilySpec,
}

async fn list_families() -> Json<Vec<FamilySummary>> {
    Json(
        registry()
            .into_iter()
            .map(|f| {
                let (k, l) = f.dimension();
                FamilySummary {
                    name: f.name.clone(),
                    notation: f.notation(),
                    k,
                    l,
                    spec: f,
                }
            })
            .collect(),
    )
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<Status>> {
    let all: Vec<Arc<Session>> = app
        .sessions
        .read()
        .unwrap_or_else(std::sync::PoisonError::into_inner)
        .values()
        .cloned()
        .collect();
    let mut out: Vec<Status> = all.iter().map(|s| s.status()).collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    id: String,
    #[serde(flatten)]
    ack: Ack,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateRequest>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let family = match (&req.family, &req.family_spec) {
        (Some(name), None) => {
            registry_entry(name).map_err(|_| ApiError::UnknownFamily(name.clone()))?
        }
        (None, Some(spec)) => {
            spec.check()?;
            spec.clone()
        }
        _ => {
            return Err(ApiError::BadRequest(
                "give exactly one of `family` and `familySpec`".into(),
            ))
        }
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let runs_dir = app.runs_dir.clone();
    let sid = id.clone();
    let s = tokio::task::spawn_blocking(move || Session::start(sid, family, req, runs_dir))
        .await
        .map_err(|e| ApiError::BadRequest(e.to_string()))??;
    let ack = s.ack();
    app.sessions
        .write()
        .unwrap_or_else(std::sync::PoisonError::into_inner)
        .insert(id.clone(), s);
    Ok((StatusCode::CREATED, Json(Created { id, ack })))
}

async fn session_status(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Status>> {
    Ok(Json(app.get(&id)?.status()))
}

async fn patch_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(p): Json<Patch>,
) -> ApiResult<Json<Ack>> {
    Ok(Json(app.get(&id)?.patch(&p)?))
}

async fn delete_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Status>> {
    let s = app
        .sessions
        .write()
        .unwrap_or_else(std::sync::PoisonError::into_inner)
        .remove(&id)
        .ok_or_else(|| ApiError::UnknownSession(id.clone()))?;
    let status = tokio::task::spawn_blocking(move || {
        s.stop();
        s.status()
    })
    .await
    .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(status))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let s = app.get(&id)?;
    let format = q.format.as_deref().unwrap_or("record");
    if format == "record" {
        let text = serde_json::to_string_pretty(&s.record())
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        return Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response());
    }
    let best = s.best().ok_or(ApiError::NoSnapshot)?;
    let prov = Provenance::new(Some(s.seed), Some(RNG_ID));
    let (mime, body) = match format {
        "ladder-json" => ("application/json", ladder_json(&best.ladder, Some(&prov))?),
        "realization-csv" => ("text/csv", realization_csv(&best.ladder, Some(&prov))?),
        "realization-svg" => ("image/svg+xml", realization_svg(&best.ladder, Some(&prov))?),
        other => return Err(ApiError::UnknownFormat(other.into())),
    };
    Ok(([(header::CONTENT_TYPE, mime)], body).into_response())
}

fn ndjson(e: &Event) -> String {
    let mut line =
        serde_json::to_string(e).unwrap_or_else(|err| format!("{{\"error\":\"{err}\"}}"));
    line.push('\n');
    line
}

async fn stream_events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let s = app.get(&id)?;
    let (rx, replay) = s.subscribe();
    let ended = replay
        .iter()
        .any(|e| matches!(e.kind, EventKind::Finished { .. }));
    let last = replay.last().map(|e| e.seq);
    let live = stream::unfold((rx, last, ended), |(mut rx, last, ended)| async move {
        if ended {
            return None;
        }
        loop {
            match rx.recv().await {
                // already sent as part of the replay
                Ok(e) if last.is_some_and(|l| e.seq <= l) => continue,
                Ok(e) => {
                    let done = matches!(e.kind, EventKind::Finished { .. });
                    return Some((e.clone(), (rx, Some(e.seq), done)));
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let body = stream::iter(replay)
        .chain(live)
        .map(|e| Ok::<_, Infallible>(ndjson(&e)));
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(body),
    )
        .into_response())
}
