//! HTTP and WebSocket API.

use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::StreamExt;
use serde::Deserialize;
use serde_json::json;
use tokio::io::{AsyncReadExt, AsyncWriteExt};

use crate::config::Mode;
use crate::error::{MapdError, Result};
use crate::events::{spawn_pump, EventHub, EventSource, PumpHandle, ScriptedSource, SharedFilter};
use crate::filter::Filter;
use crate::recorder::{check_interval, replay_stream};
use crate::runtime::Runtime;
use crate::topology::TopologyDocument;

const MAP_HTML: &str = include_str!("../static/map.html");

pub struct AppState {
    pub mode: Mode,
    pub hub: Arc<EventHub>,
    pub filter: SharedFilter,
    topology: RwLock<Arc<TopologyDocument>>,
    runtime: Option<Arc<dyn Runtime>>,
    filter_expr: Mutex<String>,
    scripted: Mutex<Option<PumpHandle>>,
    captures: Mutex<Vec<PumpHandle>>,
}

impl AppState {
    /// Serves a fixed topology; events come from [`AppState::start_scripted`].
    pub fn offline(topology: TopologyDocument, hub: Arc<EventHub>) -> Arc<Self> {
        Arc::new(AppState {
            mode: Mode::Offline,
            hub,
            filter: SharedFilter::default(),
            topology: RwLock::new(Arc::new(topology)),
            runtime: None,
            filter_expr: Mutex::new(String::new()),
            scripted: Mutex::new(None),
            captures: Mutex::new(Vec::new()),
        })
    }

    /// Reads the topology from `runtime` and captures through it.
    pub fn live(runtime: Arc<dyn Runtime>, hub: Arc<EventHub>) -> Result<Arc<Self>> {
        let doc = TopologyDocument::from_containers(&runtime.containers()?)?;
        Ok(Arc::new(AppState {
            mode: Mode::Live,
            hub,
            filter: SharedFilter::default(),
            topology: RwLock::new(Arc::new(doc)),
            runtime: Some(runtime),
            filter_expr: Mutex::new(String::new()),
            scripted: Mutex::new(None),
            captures: Mutex::new(Vec::new()),
        }))
    }

    /// Starts synthetic traffic over the current topology. Nothing is
    /// published until a filter is set.
    pub fn start_scripted(&self, seed: u64, tick: Duration) {
        let source = ScriptedSource::new(&self.topology(), seed, tick);
        self.start_source(Box::new(source));
    }

    /// Replaces the offline event source.
    pub fn start_source(&self, source: Box<dyn EventSource>) {
        let handle = spawn_pump(source, self.hub.clone(), self.filter.clone());
        if let Some(mut old) = self.scripted.lock().expect("pump lock").replace(handle) {
            old.stop();
        }
    }

    pub fn topology(&self) -> Arc<TopologyDocument> {
        self.topology.read().expect("topology lock").clone()
    }

    fn refresh_topology(&self) -> Result<Arc<TopologyDocument>> {
        let Some(rt) = &self.runtime else {
            return Ok(self.topology());
        };
        let doc = Arc::new(TopologyDocument::from_containers(&rt.containers()?)?);
        *self.topology.write().expect("topology lock") = doc.clone();
        Ok(doc)
    }

    pub fn filter_expr(&self) -> String {
        self.filter_expr.lock().expect("filter lock").clone()
    }

    /// Applies a filter: parsed locally offline, handed to a capture on
    /// every running node in live mode.
    pub fn set_filter(&self, expr: &str) -> Result<()> {
        match &self.runtime {
            None => {
                let f = Filter::parse(expr)?;
                self.filter.set(Some(f));
            }
            Some(rt) => {
                if expr.trim().is_empty() {
                    return Err(MapdError::FilterRejected("empty expression".into()));
                }
                let mut sources = Vec::new();
                for c in rt.containers()? {
                    if c.running == Some(false) {
                        continue;
                    }
                    sources.push(rt.capture(&c.name, expr)?);
                }
                let mut captures = self.captures.lock().expect("capture lock");
                for mut h in captures.drain(..) {
                    h.stop();
                }
                for s in sources {
                    captures.push(spawn_pump(s, self.hub.clone(), self.filter.clone()));
                }
            }
        }
        *self.filter_expr.lock().expect("filter lock") = expr.trim().to_string();
        Ok(())
    }

    pub fn shutdown(&self) {
        if let Some(mut h) = self.scripted.lock().expect("pump lock").take() {
            h.stop();
        }
        for mut h in self.captures.lock().expect("capture lock").drain(..) {
            h.stop();
        }
    }
}

impl IntoResponse for MapdError {
    fn into_response(self) -> Response {
        let status = match &self {
            MapdError::FilterRejected(_) | MapdError::InvalidInterval(_) => StatusCode::BAD_REQUEST,
            MapdError::UnknownRecording(_)
            | MapdError::UnknownNode(_)
            | MapdError::NodeNotRunning(_) => StatusCode::NOT_FOUND,
            MapdError::AlreadyRecording | MapdError::NotRecording | MapdError::OfflineMode => {
                StatusCode::CONFLICT
            }
            MapdError::SourceUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            MapdError::MissingLabels { .. } | MapdError::Runtime(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let body = json!({ "error": self.kind(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(|| async { Html(MAP_HTML) }))
        .route("/map.html", get(|| async { Html(MAP_HTML) }))
        .route("/api/status", get(status))
        .route("/api/topology", get(topology))
        .route("/api/nodes/{id}", get(node))
        .route("/api/filter", get(get_filter).post(set_filter))
        .route(
            "/api/recordings",
            get(list_recordings).post(recording_action),
        )
        .route("/api/recordings/{id}", get(get_recording))
        .route("/api/replay", post(replay))
        .route("/ws/events", get(ws_events))
        .route("/ws/console/{id}", get(ws_console))
        .with_state(state)
}

async fn status(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "mode": match s.mode { Mode::Live => "live", Mode::Offline => "offline" },
        "subscribers": s.hub.subscribers(),
        "dropped": s.hub.dropped(),
        "recording": s.hub.recording_len(),
        "filter": s.filter_expr(),
    }))
}

async fn topology(State(s): State<Arc<AppState>>) -> Result<Json<TopologyDocument>> {
    let doc = blocking(move || s.refresh_topology()).await?;
    Ok(Json((*doc).clone()))
}

async fn node(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    let doc = blocking(move || s.refresh_topology()).await?;
    let node = doc.node(&id).ok_or(MapdError::UnknownNode(id))?;
    Ok(Json(node).into_response())
}

#[derive(Deserialize)]
struct FilterBody {
    expr: String,
}

async fn get_filter(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "expr": s.filter_expr() }))
}

async fn set_filter(
    State(s): State<Arc<AppState>>,
    Json(body): Json<FilterBody>,
) -> Result<Json<serde_json::Value>> {
    let expr = body.expr.clone();
    blocking(move || s.set_filter(&expr)).await?;
    Ok(Json(json!({ "expr": body.expr.trim() })))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Action {
    Start,
    Stop,
}

#[derive(Deserialize)]
struct RecordingBody {
    action: Action,
}

async fn recording_action(
    State(s): State<Arc<AppState>>,
    Json(body): Json<RecordingBody>,
) -> Result<Json<serde_json::Value>> {
    match body.action {
        Action::Start => {
            let id = s.hub.start_recording(&s.filter_expr())?;
            Ok(Json(json!({ "id": id })))
        }
        Action::Stop => {
            let rec = s.hub.stop_recording()?;
            Ok(Json(json!({
                "id": rec.id,
                "filterExpr": rec.filter_expr,
                "events": rec.events.len(),
            })))
        }
    }
}

async fn list_recordings(State(s): State<Arc<AppState>>) -> Response {
    Json(s.hub.recordings()).into_response()
}

async fn get_recording(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    Ok(Json(s.hub.recording(&id)?).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ReplayBody {
    id: String,
    interval_ms: u64,
}

/// Replays a recording to every connected client.
async fn replay(
    State(s): State<Arc<AppState>>,
    Json(body): Json<ReplayBody>,
) -> Result<(StatusCode, Json<serde_json::Value>)> {
    let interval = check_interval(body.interval_ms)?;
    let rec = s.hub.recording(&body.id)?;
    let n = rec.events.len();
    let hub = s.hub.clone();
    tokio::spawn(async move {
        let mut stream = std::pin::pin!(replay_stream(rec, interval));
        while let Some(e) = stream.next().await {
            hub.rebroadcast(e);
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "id": body.id, "events": n })),
    ))
}

async fn ws_events(State(s): State<Arc<AppState>>, ws: WebSocketUpgrade) -> Response {
    let sub = s.hub.subscribe();
    ws.on_upgrade(move |socket| forward_events(socket, sub))
}

async fn forward_events(mut socket: WebSocket, mut sub: crate::events::Subscription) {
    loop {
        tokio::select! {
            event = sub.recv() => {
                let Some(event) = event else { break };
                let line = serde_json::to_string(&event).expect("event serializes");
                if socket.send(Message::Text(line.into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                _ => {}
            },
        }
    }
}

async fn ws_console(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response> {
    let Some(rt) = s.runtime.clone() else {
        return Err(MapdError::OfflineMode);
    };
    let doc = {
        let s = s.clone();
        blocking(move || s.refresh_topology()).await?
    };
    if doc.node(&id).is_none() {
        return Err(MapdError::NodeNotRunning(id));
    }
    {
        let (rt, id) = (rt.clone(), id.clone());
        blocking(move || rt.ensure_running(&id)).await?;
    }
    let mut cmd = rt.console_command(&id);
    cmd.stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .kill_on_drop(true);
    let child = cmd.spawn().map_err(|e| MapdError::Runtime(e.to_string()))?;
    Ok(ws.on_upgrade(move |socket| bridge_console(socket, child)))
}

/// Copies socket frames to the shell's stdin and its output back.
async fn bridge_console(mut socket: WebSocket, mut child: tokio::process::Child) {
    let mut stdin = child.stdin.take().expect("piped");
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let (mut out_buf, mut err_buf) = ([0u8; 4096], [0u8; 4096]);
    let (mut out_open, mut err_open) = (true, true);
    while out_open || err_open {
        tokio::select! {
            n = stdout.read(&mut out_buf), if out_open => match n {
                Ok(0) | Err(_) => out_open = false,
                Ok(n) => {
                    let text = String::from_utf8_lossy(&out_buf[..n]).into_owned();
                    if socket.send(Message::Text(text.into())).await.is_err() { break }
                }
            },
            n = stderr.read(&mut err_buf), if err_open => match n {
                Ok(0) | Err(_) => err_open = false,
                Ok(n) => {
                    let text = String::from_utf8_lossy(&err_buf[..n]).into_owned();
                    if socket.send(Message::Text(text.into())).await.is_err() { break }
                }
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(t))) => {
                    if stdin.write_all(t.as_bytes()).await.is_err() { break }
                    let _ = stdin.flush().await;
                }
                Some(Ok(Message::Binary(b))) => {
                    if stdin.write_all(&b).await.is_err() { break }
                    let _ = stdin.flush().await;
                }
                Some(Ok(_)) => {}
                _ => break,
            },
        }
    }
    let _ = child.start_kill();
    let _ = child.wait().await;
    let _ = socket.send(Message::Close(None)).await;
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| MapdError::Runtime(e.to_string()))?
}
