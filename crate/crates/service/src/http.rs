//! JSON-over-HTTP API consumed by the surgeon UI.
//!
//! Each session sits behind its own mutex; handlers take it on the blocking
//! pool since opening a study runs the fits. A background task ticks every
//! session's voice timeout and skips sessions that are busy.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use ccd_core::{FemurMeasurement, Side};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::clock::Clock;
use crate::error::ServiceError;
use crate::session::{DisplaySlot, LineKind, OpenNextOutcome, Session, SessionConfig, SessionView};

pub const TICK_INTERVAL: Duration = Duration::from_millis(250);

pub type SharedSession = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    pub config: Arc<SessionConfig>,
    pub clock: Arc<dyn Clock>,
    sessions: Arc<RwLock<HashMap<String, SharedSession>>>,
}

impl AppState {
    pub fn new(config: SessionConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            config: Arc::new(config),
            clock,
            sessions: Arc::default(),
        }
    }

    pub fn create_session(&self) -> (String, SharedSession) {
        let id = uuid::Uuid::new_v4().to_string();
        self.insert_session(id.clone())
    }

    pub fn insert_session(&self, id: String) -> (String, SharedSession) {
        let session = Arc::new(Mutex::new(Session::new(id.clone(), self.config.clone())));
        self.sessions.write().insert(id.clone(), session.clone());
        (id, session)
    }

    pub fn session(&self, id: &str) -> Result<SharedSession, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_owned()))
    }

    /// Applies voice timeouts to every idle session.
    pub fn tick_all(&self) {
        let now = self.clock.now();
        let sessions: Vec<SharedSession> = self.sessions.read().values().cloned().collect();
        for s in sessions {
            if let Some(mut guard) = s.try_lock() {
                guard.tick(now);
            }
        }
    }
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn status_for(e: &ServiceError) -> StatusCode {
    use ccd_core::Error as Core;
    match e {
        ServiceError::UnknownSession(_) | ServiceError::UnknownSlot(_) => StatusCode::NOT_FOUND,
        ServiceError::BadEndpoint(_) => StatusCode::BAD_REQUEST,
        ServiceError::MeasurementUnavailable { .. }
        | ServiceError::NoStudyOpen
        | ServiceError::FolderNotConfigured(_) => StatusCode::CONFLICT,
        ServiceError::Core(Core::CoincidentEndpoints(..) | Core::InvalidConfig(_)) => {
            StatusCode::BAD_REQUEST
        }
        ServiceError::Core(_) | ServiceError::Folder { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        ServiceError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        error_body(status_for(&self.0), self.0.to_string())
    }
}

fn error_body(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

/// `Json` whose rejections use the same `{"error": ...}` body as other
/// failures.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = Response;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(r) => Err(error_body(r.status(), r.body_text())),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs `f` on the session under its lock, on the blocking pool.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session, &dyn Clock) -> Result<T, ServiceError> + Send + 'static,
{
    let session = state.session(id)?;
    let clock = state.clock.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = session.lock();
        f(&mut guard, clock.as_ref())
    })
    .await
    .expect("session task panicked")
    .map_err(ApiError)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OpenRequest {
    pub manifest: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OpenNextResponse {
    pub outcome: serde_json::Value,
    pub session: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineEdit {
    pub slot: DisplaySlot,
    pub side: Side,
    pub which: LineKind,
    pub endpoint: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LineEditResponse {
    pub ccd_degrees: f64,
    pub measurement: FemurMeasurement,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VoiceRequest {
    pub token: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct SnapshotRequest {
    #[serde(default)]
    pub note: String,
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<SessionView>) {
    let (_, session) = state.create_session();
    let view = session.lock().view();
    (StatusCode::CREATED, Json(view))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let session = state.session(&id)?;
    let view = session.lock().view();
    Ok(Json(view))
}

async fn open_study(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<OpenRequest>,
) -> ApiResult<SessionView> {
    with_session(&state, &id, move |s, _| {
        s.open_study(&req.manifest)?;
        Ok(s.view())
    })
    .await
    .map(Json)
}

async fn open_next(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<OpenNextResponse> {
    with_session(&state, &id, |s, _| {
        let outcome: OpenNextOutcome = s.open_next()?;
        Ok(OpenNextResponse {
            outcome: serde_json::to_value(outcome).expect("serializable"),
            session: serde_json::to_value(s.view()).expect("serializable"),
        })
    })
    .await
    .map(Json)
}

async fn edit_line(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(edit): ApiJson<LineEdit>,
) -> ApiResult<LineEditResponse> {
    with_session(&state, &id, move |s, _| {
        let ccd_degrees = s.update_line(edit.slot, edit.side, edit.which, edit.endpoint, (edit.x, edit.y))?;
        let measurement = s
            .layout()
            .into_iter()
            .find(|(slot, _)| *slot == edit.slot)
            .and_then(|(_, study)| study.measurement(edit.side).cloned())
            .expect("just edited");
        Ok(LineEditResponse {
            ccd_degrees,
            measurement,
        })
    })
    .await
    .map(Json)
}

async fn voice(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<VoiceRequest>,
) -> ApiResult<crate::session::VoiceOutcome> {
    with_session(&state, &id, move |s, clock| {
        Ok(s.process_voice_token(&req.token, clock.now(), clock.wall()))
    })
    .await
    .map(Json)
}

async fn snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<crate::snapshot::Snapshot>, Response> {
    // The body is optional; an empty one means no note.
    let note = if body.iter().all(u8::is_ascii_whitespace) {
        String::new()
    } else {
        serde_json::from_slice::<SnapshotRequest>(&body)
            .map_err(|e| error_body(StatusCode::BAD_REQUEST, e.to_string()))?
            .note
    };
    with_session(&state, &id, move |s, clock| s.save_snapshot(&note, clock.wall()))
        .await
        .map(Json)
        .map_err(IntoResponse::into_response)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/open", post(open_study))
        .route("/sessions/{id}/open-next", post(open_next))
        .route("/sessions/{id}/lines", patch(edit_line))
        .route("/sessions/{id}/voice", post(voice))
        .route("/sessions/{id}/snapshot", post(snapshot))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Ticks voice timeouts until the returned handle is aborted.
pub fn spawn_ticker(state: AppState) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(TICK_INTERVAL);
        loop {
            interval.tick().await;
            state.tick_all();
        }
    })
}
