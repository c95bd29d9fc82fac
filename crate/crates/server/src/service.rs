//! The streaming session service.
//!
//! Each session runs on its own worker thread that owns the engine state.
//! Commands reach it over an unbounded queue so no action is ever dropped;
//! frames leave through a queue of `high_water` slots, and a full queue
//! blocks the worker until the client catches up.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc as std_mpsc, Arc, Mutex};
use std::thread;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tower_http::services::ServeDir;
use twistworld::action::InputState;
use twistworld::config::SessionConfig;
use twistworld::formats::write_pool;
use twistworld::rollout::{Session, SessionEvent};
use twistworld::Error;

use crate::protocol::{input_of, ClientMessage, ServerMessage};

enum Command {
    Action(InputState),
    Flush,
    Reset,
    Snapshot(oneshot::Sender<Vec<u8>>),
}

struct SessionHandle {
    config: SessionConfig,
    binary: bool,
    commands: std_mpsc::Sender<Command>,
    events: Mutex<Option<mpsc::Receiver<SessionEvent>>>,
}

pub struct AppState {
    base: SessionConfig,
    sessions: Mutex<HashMap<u64, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(base: SessionConfig) -> Arc<Self> {
        Arc::new(Self {
            base,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn get(&self, id: u64) -> Option<Arc<SessionHandle>> {
        self.sessions.lock().unwrap().get(&id).cloned()
    }

    fn remove(&self, id: u64) {
        self.sessions.lock().unwrap().remove(&id);
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

fn worker(cfg: SessionConfig, commands: std_mpsc::Receiver<Command>, events: mpsc::Sender<SessionEvent>) {
    let send_all = |frames: Vec<_>| frames.into_iter().all(|f| events.blocking_send(SessionEvent::Frame(f)).is_ok());
    let mut session = match Session::new(cfg) {
        Ok(s) => s,
        Err(e) => {
            let _ = events.blocking_send(SessionEvent::from_error(&e));
            return;
        }
    };
    if !send_all(session.take_frames()) {
        return;
    }
    for cmd in commands {
        let result = match cmd {
            Command::Action(a) => session.push_action(&a),
            Command::Flush => session.flush(),
            Command::Reset => session.reset().map(|_| session.take_frames()),
            Command::Snapshot(reply) => {
                let _ = reply.send(write_pool(session.window().pool()));
                continue;
            }
        };
        match result {
            Ok(frames) => {
                if !send_all(frames) {
                    return;
                }
            }
            Err(e) => {
                let _ = events.blocking_send(SessionEvent::from_error(&e));
                return;
            }
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub seed: Option<u64>,
    pub scene_seed: Option<u64>,
    /// Config file text layered over the server's config.
    pub config: Option<String>,
    /// Send PNGs as binary messages after each frame message.
    #[serde(default)]
    pub binary: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: u64,
    pub config: String,
}

fn error_response(status: StatusCode, e: &Error) -> Response {
    (status, Json(ServerMessage::error(e))).into_response()
}

fn not_found(id: u64) -> Response {
    error_response(StatusCode::NOT_FOUND, &Error::InvalidArgument(format!("no session {id}")))
}

fn layered(base: &SessionConfig, req: &CreateSession) -> twistworld::Result<SessionConfig> {
    let mut cfg = match &req.config {
        Some(text) => {
            let mut merged = base.to_text();
            merged.push_str(text);
            SessionConfig::parse(&merged)?
        }
        None => base.clone(),
    };
    if let Some(s) = req.seed {
        cfg.seed = s;
    }
    if let Some(s) = req.scene_seed {
        cfg.scene_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

async fn health(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok", "sessions": state.session_count() }))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Option<Json<CreateSession>>) -> Response {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let cfg = match layered(&state.base, &req) {
        Ok(c) => c,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, &e),
    };
    let (cmd_tx, cmd_rx) = std_mpsc::channel();
    let (ev_tx, ev_rx) = mpsc::channel(cfg.high_water);
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let worker_cfg = cfg.clone();
    if let Err(e) = thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || worker(worker_cfg, cmd_rx, ev_tx))
    {
        return error_response(StatusCode::INTERNAL_SERVER_ERROR, &Error::Io(e));
    }
    let text = cfg.to_text();
    state.sessions.lock().unwrap().insert(
        id,
        Arc::new(SessionHandle {
            config: cfg,
            binary: req.binary,
            commands: cmd_tx,
            events: Mutex::new(Some(ev_rx)),
        }),
    );
    log::info!("session {id} created");
    (StatusCode::CREATED, Json(SessionCreated { id, config: text })).into_response()
}

async fn session_config(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match state.get(id) {
        Some(h) => ([(header::CONTENT_TYPE, "text/plain")], h.config.to_text()).into_response(),
        None => not_found(id),
    }
}

async fn snapshot(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let Some(h) = state.get(id) else { return not_found(id) };
    let (tx, rx) = oneshot::channel();
    let gone = || error_response(StatusCode::GONE, &Error::InvalidState(format!("session {id} has ended")));
    if h.commands.send(Command::Snapshot(tx)).is_err() {
        return gone();
    }
    match tokio::time::timeout(Duration::from_secs(10), rx).await {
        Ok(Ok(bytes)) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response(),
        Ok(Err(_)) => gone(),
        Err(_) => error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            &Error::InvalidState("session is paused on a full frame buffer".into()),
        ),
    }
}

async fn stream(State(state): State<Arc<AppState>>, Path(id): Path<u64>, ws: WebSocketUpgrade) -> Response {
    let Some(h) = state.get(id) else { return not_found(id) };
    let Some(events) = h.events.lock().unwrap().take() else {
        return error_response(
            StatusCode::CONFLICT,
            &Error::InvalidState(format!("session {id} already has a stream")),
        );
    };
    ws.on_upgrade(move |socket| run_stream(state, id, h, events, socket))
}

async fn run_stream(state: Arc<AppState>, id: u64, h: Arc<SessionHandle>, mut events: mpsc::Receiver<SessionEvent>, socket: WebSocket) {
    let (mut tx, mut rx) = socket.split();
    let (fail_tx, mut fail_rx) = mpsc::channel::<Error>(1);
    let commands = h.commands.clone();
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = rx.next().await {
            let text = match msg {
                Message::Text(t) => t,
                Message::Close(_) => break,
                Message::Binary(_) => {
                    let _ = fail_tx.send(Error::InvalidArgument("binary client messages are not accepted".into())).await;
                    break;
                }
                _ => continue,
            };
            let cmd = match ClientMessage::parse(&text) {
                Ok(ClientMessage::Action { keys, dx, dy, dt }) => input_of(&keys, dx, dy, dt).map(Command::Action),
                Ok(ClientMessage::Flush) => Ok(Command::Flush),
                Ok(ClientMessage::Reset) => Ok(Command::Reset),
                Err(e) => Err(e),
            };
            match cmd {
                Ok(c) => {
                    if commands.send(c).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = fail_tx.send(e).await;
                    break;
                }
            }
        }
    });

    loop {
        let out = tokio::select! {
            ev = events.recv() => match ev {
                Some(SessionEvent::Frame(f)) => {
                    let msg = Message::Text(ServerMessage::frame(&f, !h.binary).to_json().into());
                    if tx.send(msg).await.is_err() {
                        break;
                    }
                    if h.binary {
                        Some(Message::Binary(f.image.to_png().into()))
                    } else {
                        None
                    }
                }
                Some(SessionEvent::Error { code, detail }) => {
                    let _ = tx.send(Message::Text(ServerMessage::Error { code, detail }.to_json().into())).await;
                    break;
                }
                Some(SessionEvent::End) | None => break,
            },
            Some(e) = fail_rx.recv() => {
                log::warn!("session {id}: {e}");
                let _ = tx.send(Message::Text(ServerMessage::error(&e).to_json().into())).await;
                break;
            }
        };
        if let Some(m) = out {
            if tx.send(m).await.is_err() {
                break;
            }
        }
    }
    let _ = tx.send(Message::Close(None)).await;
    reader.abort();
    state.remove(id);
    log::info!("session {id} closed");
}

/// Routes of the service; `ui_dir` is served under `/ui`.
pub fn router(state: Arc<AppState>, ui_dir: PathBuf) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/config", get(session_config))
        .route("/sessions/{id}/snapshot", post(snapshot))
        .route("/sessions/{id}/stream", get(stream))
        .nest_service("/ui", ServeDir::new(ui_dir))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, base: SessionConfig, ui_dir: PathBuf) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(base), ui_dir)).await
}

/// Binds `addr` and serves on a background runtime thread; returns the bound
/// address.
pub fn spawn(addr: SocketAddr, base: SessionConfig, ui_dir: PathBuf) -> std::io::Result<SocketAddr> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    thread::Builder::new().name("twistworld-serve".into()).spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
        rt.block_on(async move {
            let listener = TcpListener::from_std(listener).expect("listener");
            if let Err(e) = serve(listener, base, ui_dir).await {
                log::error!("server stopped: {e}");
            }
        });
    })?;
    Ok(local)
}
