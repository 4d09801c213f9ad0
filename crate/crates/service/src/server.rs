//! HTTP + websocket front end.
//!
//! One task owns the [`Hub`]; every connection funnels its commands through
//! a channel to it, so arrival order defines semantics. Events fan out over a
//! bounded broadcast channel; a client that falls more than `backlog` events
//! behind is disconnected.
//!
//! Routes: `GET /ws` (websocket, envelopes both ways), `GET /snapshot`,
//! `POST /command` (bare command payload in, reply out), `GET /health`, and
//! the static directory at `/` when configured.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::sync::{broadcast, mpsc, oneshot};
use tower_http::services::ServeDir;
use tracing::{info, warn};

use teleassist_core::pose::Pose;

use crate::config::ServiceConfig;
use crate::hub::Hub;
use crate::protocol::{event_envelope, reply_envelope, Command, Envelope, Kind, Reply};
use crate::record::{header_payload, now_ms, write_entry, EntryKind, LogEntry};
use crate::ServiceError;

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Write every command, reply and event to this JSON-lines file.
    pub record: Option<PathBuf>,
    /// Objects injected at startup, as if a detector had reported them.
    pub inject: Vec<(String, Pose)>,
}

enum Request {
    Command {
        payload: Value,
        reply: oneshot::Sender<Reply>,
    },
    Subscribe {
        reply: oneshot::Sender<(Value, broadcast::Receiver<Arc<Value>>)>,
    },
    Snapshot {
        reply: oneshot::Sender<Value>,
    },
}

#[derive(Clone)]
struct AppState {
    requests: mpsc::Sender<Request>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    join: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.join.await;
    }

    /// Runs until the server stops on its own.
    pub async fn wait(self) {
        let _ = self.join.await;
    }
}

struct Recorder {
    out: BufWriter<File>,
    next: u64,
}

impl Recorder {
    fn create(path: &PathBuf, config: &ServiceConfig) -> Result<Self, ServiceError> {
        let file = File::create(path).map_err(|e| ServiceError::Log(format!("{}: {e}", path.display())))?;
        let mut rec = Self {
            out: BufWriter::new(file),
            next: 0,
        };
        rec.write(EntryKind::Header, header_payload(config));
        Ok(rec)
    }

    fn write(&mut self, kind: EntryKind, payload: Value) {
        let entry = LogEntry {
            index: self.next,
            kind,
            time_ms: now_ms(),
            payload,
        };
        self.next += 1;
        if let Err(e) = write_entry(&mut self.out, &entry) {
            warn!("event log write failed: {e}");
        }
    }

    fn flush(&mut self) {
        use std::io::Write;
        if let Err(e) = self.out.flush() {
            warn!("event log flush failed: {e}");
        }
    }
}

fn hub_task(
    mut hub: Hub,
    mut requests: mpsc::Receiver<Request>,
    events: broadcast::Sender<Arc<Value>>,
    mut recorder: Option<Recorder>,
) {
    while let Some(req) = requests.blocking_recv() {
        match req {
            Request::Command { payload, reply } => {
                let outcome = hub.apply_value(&payload);
                if let Some(rec) = recorder.as_mut() {
                    rec.write(EntryKind::Command, payload);
                    rec.write(
                        EntryKind::Reply,
                        serde_json::to_value(&outcome.reply).expect("reply serializes"),
                    );
                    for e in &outcome.events {
                        rec.write(EntryKind::Event, e.clone());
                    }
                    rec.flush();
                }
                for e in outcome.events {
                    let _ = events.send(Arc::new(e));
                }
                let _ = reply.send(outcome.reply);
            }
            Request::Subscribe { reply } => {
                let _ = reply.send((hub.snapshot_event(), events.subscribe()));
            }
            Request::Snapshot { reply } => {
                let _ = reply.send(hub.snapshot_event());
            }
        }
    }
}

impl AppState {
    async fn command(&self, payload: Value) -> Option<Reply> {
        let (tx, rx) = oneshot::channel();
        self.requests.send(Request::Command { payload, reply: tx }).await.ok()?;
        rx.await.ok()
    }
}

/// Binds the listener and starts serving. Port 0 picks a free port.
pub async fn serve(config: ServiceConfig, options: ServeOptions) -> Result<ServerHandle, ServiceError> {
    let mut config = config;
    if let Ok(abs) = std::fs::canonicalize(&config.server.manifest) {
        config.server.manifest = abs;
    }
    let hub = Hub::from_config(&config)?;
    let recorder = match &options.record {
        Some(path) => Some(Recorder::create(path, &config)?),
        None => None,
    };
    let (req_tx, req_rx) = mpsc::channel(256);
    let (ev_tx, _) = broadcast::channel(config.server.backlog);
    std::thread::spawn(move || hub_task(hub, req_rx, ev_tx, recorder));
    let state = AppState { requests: req_tx };

    for (class, pose) in &options.inject {
        let payload = serde_json::to_value(Command::InjectDetection {
            object_class: class.clone(),
            pose: pose.to_wire(),
        })
        .expect("command serializes");
        match state.command(payload).await {
            Some(r) if r.ok => info!("injected {class}"),
            Some(r) => return Err(ServiceError::Config(format!("cannot inject {class}: {:?}", r.error))),
            None => return Err(ServiceError::Config("hub stopped".into())),
        }
    }

    let mut app = Router::new()
        .route("/ws", get(ws_route))
        .route("/snapshot", get(snapshot_route))
        .route("/command", post(command_route))
        .route("/health", get(|| async { "ok" }))
        .with_state(state);
    if let Some(dir) = &config.server.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }

    let listener = tokio::net::TcpListener::bind((config.server.bind.as_str(), config.server.port))
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let join = tokio::spawn(async move {
        let server = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = stop_rx.await;
        });
        if let Err(e) = server.await {
            warn!("server stopped: {e}");
        }
    });
    info!("listening on {addr}");
    Ok(ServerHandle {
        addr,
        shutdown: Some(stop_tx),
        join,
    })
}

async fn snapshot_route(State(state): State<AppState>) -> Response {
    let (tx, rx) = oneshot::channel();
    if state.requests.send(Request::Snapshot { reply: tx }).await.is_err() {
        return (axum::http::StatusCode::SERVICE_UNAVAILABLE, "hub stopped").into_response();
    }
    match rx.await {
        Ok(v) => Json(v).into_response(),
        Err(_) => (axum::http::StatusCode::SERVICE_UNAVAILABLE, "hub stopped").into_response(),
    }
}

async fn command_route(State(state): State<AppState>, Json(payload): Json<Value>) -> Response {
    match state.command(payload).await {
        Some(reply) => Json(reply).into_response(),
        None => (axum::http::StatusCode::SERVICE_UNAVAILABLE, "hub stopped").into_response(),
    }
}

async fn ws_route(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

fn text(env: &Envelope) -> Message {
    Message::Text(serde_json::to_string(env).expect("envelope serializes").into())
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (tx, rx) = oneshot::channel();
    if state.requests.send(Request::Subscribe { reply: tx }).await.is_err() {
        return;
    }
    let Ok((snapshot, mut events)) = rx.await else {
        return;
    };
    let mut seq = 0u64;
    if sink.send(text(&event_envelope(seq, snapshot))).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = stream.next() => {
                let msg = match incoming {
                    Some(Ok(m)) => m,
                    _ => break,
                };
                let body = match msg {
                    Message::Text(t) => t.to_string(),
                    Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
                    Message::Close(_) => break,
                    _ => continue,
                };
                let (reply_to, payload) = match serde_json::from_str::<Envelope>(&body) {
                    Ok(env) if env.kind == Kind::Command => (Some(env.seq), env.payload),
                    Ok(env) => (Some(env.seq), serde_json::json!({"type": null, "reason": "only commands are accepted"})),
                    Err(e) => (None, serde_json::json!({"type": null, "reason": e.to_string()})),
                };
                let Some(reply) = state.command(payload).await else {
                    break;
                };
                // the hub publishes a command's events before replying
                loop {
                    match events.try_recv() {
                        Ok(v) => {
                            if !forward(&mut sink, &mut seq, &v).await {
                                return;
                            }
                        }
                        Err(broadcast::error::TryRecvError::Lagged(n)) => {
                            drop_lagging(&mut sink, n).await;
                            return;
                        }
                        Err(_) => break,
                    }
                }
                seq += 1;
                if sink.send(text(&reply_envelope(seq, reply_to, &reply))).await.is_err() {
                    break;
                }
            }
            event = events.recv() => {
                match event {
                    Ok(v) => {
                        if !forward(&mut sink, &mut seq, &v).await {
                            break;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        drop_lagging(&mut sink, n).await;
                        break;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                }
            }
        }
    }
}

type Sink = futures::stream::SplitSink<WebSocket, Message>;

async fn forward(sink: &mut Sink, seq: &mut u64, event: &Value) -> bool {
    *seq += 1;
    sink.send(text(&event_envelope(*seq, event.clone()))).await.is_ok()
}

async fn drop_lagging(sink: &mut Sink, missed: u64) {
    warn!("client fell {missed} events behind; disconnecting");
    let _ = sink
        .send(Message::Close(Some(axum::extract::ws::CloseFrame {
            code: 1008,
            reason: "event backlog exceeded".into(),
        })))
        .await;
}
