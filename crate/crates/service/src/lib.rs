//! JSON-over-HTTP access to knowledge bases and recommendation sessions.
//!
//! Every session operation loads the snapshot from the [`SessionStore`],
//! applies the operation under a per-session lock, and persists the result
//! before responding. The wire format is documented in `docs/api.md`.

mod error;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use patternwise_core::assistant::{self, AssistantConfig, AssistantExchange};
use patternwise_core::maut::Explanation;
use patternwise_core::model::{KbLevel, KnowledgeBase};
use patternwise_core::session::{AnswerOutcome, Question, Session, SessionState};
use patternwise_core::KbCatalog;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;
pub use store::{SessionStore, StoreError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub kb_dir: PathBuf,
    pub store_dir: PathBuf,
    pub listen: SocketAddr,
    pub assistant: AssistantConfig,
    /// Origins allowed to call the API from a browser.
    pub allow_origins: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot load knowledge bases from {}: {source}", dir.display())]
    KbDir {
        dir: PathBuf,
        source: patternwise_core::Error,
    },
    #[error("no knowledge bases found in {}", .0.display())]
    NoKbs(PathBuf),
    #[error("cannot open session store: {0}")]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("invalid allowed origin `{0}`")]
    Origin(String),
    #[error("server error: {0}")]
    Server(std::io::Error),
}

pub struct AppState {
    pub catalog: Arc<KbCatalog>,
    pub store: SessionStore,
    pub assistant: AssistantConfig,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(catalog: KbCatalog, store: SessionStore, assistant: AssistantConfig) -> Self {
        AppState {
            catalog: Arc::new(catalog),
            store,
            assistant,
            locks: Mutex::new(HashMap::new()),
        }
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Runs `op` on the stored session under its lock and persists the
    /// session before returning.
    async fn with_session<T>(
        &self,
        id: &str,
        op: impl FnOnce(&mut Session, &KbCatalog) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let mut session = self.store.load(id)?;
        let before = session.clone();
        let result = op(&mut session, &self.catalog);
        if session != before {
            self.store.save(&session)?;
        }
        result
    }
}

/// Loads the catalog and store and builds the application state.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, ServeError> {
    let catalog = KbCatalog::load_dir(&config.kb_dir).map_err(|source| ServeError::KbDir {
        dir: config.kb_dir.clone(),
        source,
    })?;
    if catalog.is_empty() {
        return Err(ServeError::NoKbs(config.kb_dir.clone()));
    }
    let store = SessionStore::open(&config.store_dir)?;
    Ok(AppState::new(catalog, store, config.assistant.clone()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/kbs", get(list_kbs))
        .route("/kbs/{id}", get(get_kb))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/question", get(get_question))
        .route("/sessions/{id}/answers", post(post_answer))
        .route("/sessions/{id}/answers/{property}", delete(retract_answer))
        .route("/sessions/{id}/assistant", post(post_assistant))
        .route("/sessions/{id}/recommendations", get(get_recommendations))
        .route("/sessions/{id}/selection", post(post_selection))
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
        })
        .with_state(state)
}

/// Binds, loads everything and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = Arc::new(build_state(&config)?);
    let mut app = router(state);
    if !config.allow_origins.is_empty() {
        let origins = config
            .allow_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| ServeError::Origin(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods(tower_http::cors::Any)
                .allow_headers(tower_http::cors::Any),
        );
    }
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.listen,
            source,
        })?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Server)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbSummary {
    pub id: String,
    pub level: KbLevel,
    pub description: String,
    pub patterns: usize,
    pub context_properties: usize,
    pub pattern_properties: usize,
    pub filters: usize,
}

impl KbSummary {
    fn of(kb: &KnowledgeBase) -> Self {
        KbSummary {
            id: kb.id.clone(),
            level: kb.level,
            description: kb.description.clone(),
            patterns: kb.patterns.len(),
            context_properties: kb.context_properties().count(),
            pattern_properties: kb.pattern_properties().count(),
            filters: kb.filter_conditions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session: Session,
    pub feasible_count: usize,
    pub feasible: Vec<String>,
}

impl SessionView {
    fn of(session: Session, catalog: &KbCatalog) -> Result<Self, ApiError> {
        let feasibility = session.feasibility(catalog)?;
        Ok(SessionView {
            feasible_count: feasibility.feasible.len(),
            feasible: feasibility.feasible,
            session,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResponse {
    /// `None` once every context property is answered.
    pub question: Option<Question>,
    pub state: SessionState,
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub requirement: String,
    pub kb: String,
}

#[derive(Debug, Deserialize)]
pub struct AnswerRequest {
    pub property: String,
    pub value: String,
}

#[derive(Debug, Deserialize)]
pub struct AssistantRequest {
    pub question: String,
}

#[derive(Debug, Deserialize)]
pub struct SelectionRequest {
    pub pattern: String,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(ApiError::from)
}

async fn list_kbs(State(state): State<Arc<AppState>>) -> Json<Vec<KbSummary>> {
    Json(state.catalog.iter().map(|kb| KbSummary::of(kb)).collect())
}

async fn get_kb(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<KnowledgeBase>, ApiError> {
    Ok(Json(state.catalog.require(&id)?.as_ref().clone()))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let session = Session::start(&state.catalog, &req.requirement, &req.kb)?;
    state.store.save(&session)?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let view = state
        .with_session(&id, |s, cat| SessionView::of(s.clone(), cat))
        .await?;
    Ok(Json(view))
}

async fn get_question(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<QuestionResponse>, ApiError> {
    let resp = state
        .with_session(&id, |s, cat| {
            let question = s.next_question(cat)?;
            Ok(QuestionResponse {
                question,
                state: s.state,
            })
        })
        .await?;
    Ok(Json(resp))
}

async fn post_answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Json<AnswerOutcome>, ApiError> {
    let req = body(payload)?;
    let out = state
        .with_session(&id, |s, cat| {
            Ok(s.answer(cat, &req.property, &req.value)?)
        })
        .await?;
    Ok(Json(out))
}

async fn retract_answer(
    State(state): State<Arc<AppState>>,
    Path((id, property)): Path<(String, String)>,
) -> Result<Json<SessionView>, ApiError> {
    let view = state
        .with_session(&id, |s, cat| {
            s.retract(cat, &property)?;
            SessionView::of(s.clone(), cat)
        })
        .await?;
    Ok(Json(view))
}

async fn post_assistant(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<AssistantRequest>, JsonRejection>,
) -> Result<Json<AssistantExchange>, ApiError> {
    let req = body(payload)?;
    let (kb, ctx) = state
        .with_session(&id, |s, cat| Ok(s.assistant_input(cat)?))
        .await?;
    // The backend call may block on the network; the session lock is not held.
    let config = state.assistant.clone();
    let exchange =
        tokio::task::spawn_blocking(move || assistant::ask(&config, &kb, &ctx, &req.question))
            .await
            .map_err(|e| ApiError::internal(format!("assistant task failed: {e}")))?;
    let recorded = exchange.clone();
    state
        .with_session(&id, move |s, _| {
            s.record_exchange(recorded);
            Ok(())
        })
        .await?;
    Ok(Json(exchange))
}

async fn get_recommendations(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Explanation>, ApiError> {
    let e = state
        .with_session(&id, |s, cat| Ok(s.recommendations(cat)?))
        .await?;
    Ok(Json(e))
}

async fn post_selection(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<SelectionRequest>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let req = body(payload)?;
    let view = state
        .with_session(&id, |s, cat| {
            s.select_pattern(cat, &req.pattern)?;
            SessionView::of(s.clone(), cat)
        })
        .await?;
    Ok(Json(view))
}
