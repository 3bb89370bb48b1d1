//! HTTP session API over a single agent.

pub mod journal;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use sola_core::agent::{Agent, AgentError, SideAnswer};
use sola_core::knowledge::Vote;
use sola_core::model::{render_pattern, ActionId, SessionId, TaskId, UserId};
use sola_core::snapshot::save_snapshot;
use sola_core::world::WorldState;

pub use journal::{replay, Call, ReplayError};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("no snapshot path configured")]
    NoSnapshotPath,
    #[error(transparent)]
    Snapshot(#[from] sola_core::snapshot::SnapshotError),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Agent(e) => match e {
                AgentError::UnknownSession(_) => StatusCode::NOT_FOUND,
                AgentError::PhaseMismatch { .. } | AgentError::NotPending(_) | AgentError::NoAbandonedTask => {
                    StatusCode::CONFLICT
                }
                AgentError::IndexOutOfRange { .. } | AgentError::UnknownAction(_) | AgentError::MissingArg(_) => {
                    StatusCode::BAD_REQUEST
                }
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            ApiError::NoSnapshotPath => StatusCode::CONFLICT,
            ApiError::Snapshot(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// Everything behind the lock: one writer at a time, many readers.
pub struct Inner {
    pub agent: Agent,
    pub world: WorldState,
    pub journal: Vec<Call>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<RwLock<Inner>>,
    snapshot: Option<PathBuf>,
}

impl AppState {
    pub fn new(agent: Agent, world: WorldState) -> Self {
        AppState { inner: Arc::new(RwLock::new(Inner { agent, world, journal: Vec::new() })), snapshot: None }
    }

    pub fn with_snapshot_path(mut self, path: PathBuf) -> Self {
        self.snapshot = Some(path);
        self
    }

    pub fn read<R>(&self, f: impl FnOnce(&Inner) -> R) -> R {
        f(&self.inner.read().expect("state lock poisoned"))
    }

    fn write<R>(&self, f: impl FnOnce(&mut Inner) -> R) -> R {
        f(&mut self.inner.write().expect("state lock poisoned"))
    }

    /// Runs `call` through the engine and journals it when accepted.
    fn mutate(&self, call: Call) -> ApiResult {
        self.write(|inner| {
            let turn = journal::apply(&mut inner.agent, &mut inner.world, &call)?;
            inner.journal.push(call);
            Ok(Json(serde_json::to_value(turn).expect("turns serialize")))
        })
    }

    /// Saves a snapshot to the configured path.
    pub fn save(&self) -> Result<sola_core::snapshot::Header, ApiError> {
        let path = self.snapshot.as_ref().ok_or(ApiError::NoSnapshotPath)?;
        self.read(|inner| Ok(save_snapshot(inner.agent.state(), &inner.agent.config().knowledge, path)?))
    }
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    b.map(|Json(t)| t).map_err(|e| ApiError::BadRequest(e.body_text()))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OpenBody {
    user_id: UserId,
    #[serde(default)]
    task_filter: Option<TaskId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextBody {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceBody {
    #[serde(default)]
    index: Option<usize>,
    #[serde(default)]
    none: bool,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SlotBody {
    arg_name: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SideBody {
    #[serde(default)]
    vote: Option<Vote>,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    skip: bool,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DemoBody {
    action_id: ActionId,
    #[serde(default)]
    args: BTreeMap<String, String>,
}

async fn open_session(State(app): State<AppState>, b: Result<Json<OpenBody>, JsonRejection>) -> ApiResult {
    let b = body(b)?;
    app.write(|inner| {
        let sid = inner.agent.open_session(b.user_id.clone(), b.task_filter.clone());
        inner.journal.push(Call::OpenSession { session_id: sid, user_id: b.user_id, task_filter: b.task_filter });
        Ok(Json(json!({ "sessionId": sid })))
    })
}

async fn get_session(State(app): State<AppState>, Path(id): Path<u64>) -> ApiResult {
    app.read(|inner| {
        let s = inner.agent.session(SessionId(id)).ok_or(AgentError::UnknownSession(SessionId(id)))?;
        Ok(Json(json!({
            "sessionId": s.id,
            "userId": s.user_id,
            "phase": s.phase,
            "questionBudget": s.question_budget,
            "transcript": s.transcript,
        })))
    })
}

async fn utterance(State(app): State<AppState>, Path(id): Path<u64>, b: Result<Json<TextBody>, JsonRejection>) -> ApiResult {
    let text = body(b)?.text;
    let session_id = SessionId(id);
    // a free-text reply to "say it again" is a rephrase
    let rephrasing = app.read(|inner| {
        inner
            .agent
            .session(session_id)
            .map(|s| s.phase.name() == "AwaitRephrase")
            .ok_or(AgentError::UnknownSession(session_id))
    })?;
    if rephrasing {
        app.mutate(Call::Rephrase { session_id, text })
    } else {
        app.mutate(Call::Utterance { session_id, text })
    }
}

async fn choice(State(app): State<AppState>, Path(id): Path<u64>, b: Result<Json<ChoiceBody>, JsonRejection>) -> ApiResult {
    let b = body(b)?;
    if b.none && b.index.is_some() {
        return Err(ApiError::BadRequest("give either index or none".into()));
    }
    app.mutate(Call::Choice { session_id: SessionId(id), index: b.index })
}

async fn slot(State(app): State<AppState>, Path(id): Path<u64>, b: Result<Json<SlotBody>, JsonRejection>) -> ApiResult {
    let b = body(b)?;
    app.mutate(Call::Slot { session_id: SessionId(id), arg_name: b.arg_name, text: b.text })
}

async fn side(State(app): State<AppState>, Path(id): Path<u64>, b: Result<Json<SideBody>, JsonRejection>) -> ApiResult {
    let answer = match body(b)? {
        SideBody { vote: Some(v), answer: None, skip: false } => SideAnswer::Vote(v),
        SideBody { vote: None, answer: Some(a), skip: false } => SideAnswer::Text(a),
        SideBody { vote: None, answer: None, skip: true } => SideAnswer::Skip,
        _ => return Err(ApiError::BadRequest("give exactly one of vote, answer or skip".into())),
    };
    app.mutate(Call::Side { session_id: SessionId(id), answer })
}

async fn demonstrate(State(app): State<AppState>, Path(id): Path<u64>, b: Result<Json<DemoBody>, JsonRejection>) -> ApiResult {
    let b = body(b)?;
    app.mutate(Call::Demonstrate { session_id: SessionId(id), action_id: b.action_id, args: b.args })
}

async fn seed_commands(State(app): State<AppState>) -> Json<Value> {
    app.read(|inner| {
        let list: Vec<Value> = inner
            .agent
            .state()
            .store
            .commands()
            .iter()
            .map(|sc| {
                let mut v = serde_json::to_value(sc).expect("seed commands serialize");
                v["text"] = json!(render_pattern(&sc.pattern));
                v
            })
            .collect();
        Json(json!({ "seedCommands": list }))
    })
}

async fn facts(State(app): State<AppState>) -> Json<Value> {
    app.read(|inner| {
        let kb = &inner.agent.state().kb;
        let list: Vec<Value> = kb
            .facts()
            .iter()
            .map(|f| {
                let mut v = serde_json::to_value(f).expect("facts serialize");
                v["text"] = json!(f.text());
                v
            })
            .collect();
        Json(json!({ "facts": list, "questions": kb.questions() }))
    })
}

async fn metrics(State(app): State<AppState>) -> Json<Value> {
    app.read(|inner| Json(json!({ "series": inner.agent.state().metrics })))
}

async fn journal_text(State(app): State<AppState>) -> String {
    app.read(|inner| journal::to_jsonl(&inner.journal))
}

async fn snapshot(State(app): State<AppState>) -> ApiResult {
    let header = app.save()?;
    Ok(Json(serde_json::to_value(header).expect("headers serialize")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/choice", post(choice))
        .route("/sessions/{id}/slot", post(slot))
        .route("/sessions/{id}/side", post(side))
        .route("/sessions/{id}/demonstrate", post(demonstrate))
        .route("/store/seed-commands", get(seed_commands))
        .route("/kb/facts", get(facts))
        .route("/metrics", get(metrics))
        .route("/journal", get(journal_text))
        .route("/snapshot", post(snapshot))
        .with_state(state)
}

/// Serves until ctrl-c, then saves a snapshot if a path is configured.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let app = router(state.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if state.snapshot.is_some() {
        state.save().map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    Ok(())
}
