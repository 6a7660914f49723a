//! HTTP service for live teaching sessions.
//!
//! Sessions are independent; each takes one request at a time and answers
//! `409 busy` to a concurrent one. All sessions share one lexicon. Steps
//! read it, feedback writes it, and writers are served in arrival order.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{Mutex as AsyncMutex, RwLock};
use wac_core::{build_arena, ArenaConfig, EpisodeSettings, Feature, Feedback, Frame, Lexicon, Mode, Thresholds, FEATURE_DIM};

use crate::format::{save_lexicon, FormatError};
use crate::session::{Phase, Session, SessionError};

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code, message: message.into(), phase: None } }
    }

    fn busy(id: u64) -> Self {
        Self::new(StatusCode::CONFLICT, "busy", format!("session {id} is handling another request"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", rejection.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(err: SessionError) -> Self {
        match err {
            SessionError::Phase { phase, .. } => {
                let mut e = ApiError::new(StatusCode::CONFLICT, "phase_violation", err.to_string());
                e.body.phase = Some(phase);
                e
            }
            SessionError::Core(core) => core.into(),
        }
    }
}

impl From<wac_core::Error> for ApiError {
    fn from(err: wac_core::Error) -> Self {
        use wac_core::Error::*;
        let (status, code) = match &err {
            Config(_) | Construction(_) | InvalidObject { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
            InvalidInput(_) => (StatusCode::BAD_REQUEST, "invalid_input"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, err.to_string())
    }
}

impl From<FormatError> for ApiError {
    fn from(err: FormatError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "save_failed", err.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Shared {
    sessions: Mutex<HashMap<u64, Arc<AsyncMutex<Session>>>>,
    next_id: AtomicU64,
    lexicon: RwLock<Lexicon>,
    lexicon_path: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// `lexicon_path` is where `POST /lexicon/save` and shutdown write to.
    pub fn new(lexicon: Lexicon, lexicon_path: Option<PathBuf>) -> Self {
        AppState(Arc::new(Shared {
            sessions: Mutex::default(),
            next_id: AtomicU64::new(1),
            lexicon: RwLock::new(lexicon),
            lexicon_path,
        }))
    }

    pub async fn lexicon(&self) -> Lexicon {
        self.0.lexicon.read().await.clone()
    }

    /// Saves the shared lexicon to the configured path, if any.
    pub async fn save(&self) -> Result<Option<PathBuf>, FormatError> {
        let Some(path) = &self.0.lexicon_path else { return Ok(None) };
        let lexicon = self.0.lexicon.read().await;
        save_lexicon(&lexicon, path)?;
        Ok(Some(path.clone()))
    }

    /// Handle to a live session. Holding its lock makes requests for that
    /// session answer `409 busy`.
    pub fn session_handle(&self, id: u64) -> Option<Arc<AsyncMutex<Session>>> {
        self.0.sessions.lock().expect("session table poisoned").get(&id).cloned()
    }

    fn session(&self, raw_id: &str) -> Result<(u64, Arc<AsyncMutex<Session>>), ApiError> {
        let missing = || ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {raw_id:?}"));
        let id: u64 = raw_id.parse().map_err(|_| missing())?;
        let sessions = self.0.sessions.lock().expect("session table poisoned");
        sessions.get(&id).cloned().map(|s| (id, s)).ok_or_else(missing)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/lexicon", get(lexicon_summary))
        .route("/lexicon/save", post(save))
        .route("/lexicon/{word}", get(lexicon_word))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then saves the lexicon.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    axum::serve(listener, router(state.clone())).with_graceful_shutdown(shutdown).await?;
    if let Some(path) = state.save().await? {
        tracing::info!(path = %path.display(), "lexicon saved");
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub arena_config: Option<ArenaConfig>,
    pub seed: u64,
    pub frame: Frame,
    pub thresholds: Option<Thresholds>,
    /// Episodes before the session is done; unlimited when absent.
    pub episodes: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct Created {
    pub session_id: u64,
    pub phase: Phase,
    pub arena_snapshot: wac_core::Arena,
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(req) = body?;
    let config = req.arena_config.unwrap_or_default();
    config.validate()?;
    let arena = build_arena(&config, req.seed)?;
    let settings = EpisodeSettings {
        thresholds: req.thresholds.unwrap_or_default(),
        frame: req.frame,
        mode: Mode::Learning,
        seed: req.seed,
    };
    let id = state.0.next_id.fetch_add(1, Ordering::Relaxed);
    let session = Session::new(id, arena.clone(), settings, req.episodes);
    state.0.sessions.lock().expect("session table poisoned").insert(id, Arc::new(AsyncMutex::new(session)));
    tracing::debug!(id, seed = req.seed, "session created");
    Ok((StatusCode::CREATED, Json(Created { session_id: id, phase: Phase::AwaitingUtterance, arena_snapshot: arena })))
}

async fn session_state(State(state): State<AppState>, Path(raw): Path<String>) -> Result<Response, ApiError> {
    let (id, session) = state.session(&raw)?;
    let guard = session.try_lock().map_err(|_| ApiError::busy(id))?;
    Ok(Json(guard.view()).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRequest {
    pub text: String,
}

#[derive(Debug, Serialize)]
pub struct UtteranceReply {
    pub tokens: Vec<String>,
    pub phase: Phase,
}

async fn utterance(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    body: Result<Json<UtteranceRequest>, JsonRejection>,
) -> ApiResult<UtteranceReply> {
    let (id, session) = state.session(&raw)?;
    let mut guard = session.try_lock().map_err(|_| ApiError::busy(id))?;
    let Json(req) = body?;
    let utterance = guard.utter(&req.text)?;
    Ok(Json(UtteranceReply { tokens: utterance.tokens, phase: guard.phase() }))
}

async fn step(State(state): State<AppState>, Path(raw): Path<String>) -> Result<Response, ApiError> {
    let (id, session) = state.session(&raw)?;
    let mut guard = session.try_lock().map_err(|_| ApiError::busy(id))?;
    let lexicon = state.0.lexicon.read().await;
    let reply = guard.step(&lexicon)?;
    Ok(Json(reply).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub sign: i64,
}

async fn feedback(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    body: Result<Json<FeedbackRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let (id, session) = state.session(&raw)?;
    let mut guard = session.try_lock().map_err(|_| ApiError::busy(id))?;
    let Json(req) = body?;
    let signal = Feedback::from_sign(req.sign)?;
    let mut lexicon = state.0.lexicon.write().await;
    let reply = guard.feedback(&mut lexicon, signal)?;
    Ok(Json(reply).into_response())
}

#[derive(Debug, Serialize)]
pub struct WordSummary {
    pub token: String,
    pub pos_count: u64,
    pub neg_count: u64,
}

#[derive(Debug, Serialize)]
pub struct LexiconSummary {
    pub schema_version: u32,
    pub rng_seed: u64,
    pub words: Vec<WordSummary>,
}

async fn lexicon_summary(State(state): State<AppState>) -> Json<LexiconSummary> {
    let lexicon = state.0.lexicon.read().await;
    Json(LexiconSummary {
        schema_version: lexicon.schema_version(),
        rng_seed: lexicon.rng_seed(),
        words: lexicon
            .words()
            .map(|c| WordSummary { token: c.token().to_string(), pos_count: c.pos_count(), neg_count: c.neg_count() })
            .collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct WordDetail {
    pub token: String,
    /// False when the word has never been trained; weights are then zero.
    pub known: bool,
    pub features: [&'static str; FEATURE_DIM],
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
    pub pos_count: u64,
    pub neg_count: u64,
}

async fn lexicon_word(State(state): State<AppState>, Path(word): Path<String>) -> Json<WordDetail> {
    let lexicon = state.0.lexicon.read().await;
    let known = lexicon.get(&word).is_some();
    let c = lexicon.lookup(&word);
    Json(WordDetail {
        token: c.token().to_string(),
        known,
        features: Feature::ALL.map(Feature::name),
        weights: *c.weights(),
        bias: c.bias(),
        pos_count: c.pos_count(),
        neg_count: c.neg_count(),
    })
}

#[derive(Debug, Serialize)]
pub struct Saved {
    pub path: PathBuf,
    pub words: usize,
}

async fn save(State(state): State<AppState>) -> ApiResult<Saved> {
    let words = state.0.lexicon.read().await.len();
    match state.save().await? {
        Some(path) => Ok(Json(Saved { path, words })),
        None => Err(ApiError::new(
            StatusCode::CONFLICT,
            "no_lexicon_path",
            "service was started without a lexicon file to save to",
        )),
    }
}
