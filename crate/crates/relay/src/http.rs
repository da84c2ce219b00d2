//! HTTP endpoints for browser clients:
//!
//! - `GET /catalog` the catalog document, verbatim
//! - `GET /diagnostics` fusion weights and server settings
//! - `GET /ws` the relay protocol over WebSocket; every binary message
//!   carries exactly one encoded frame (length prefix included), a text
//!   message is taken as a JSON control frame

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use bytes::Bytes;
use futures::{SinkExt, StreamExt};
use tokio_util::sync::CancellationToken;

use crate::frame::{Frame, FrameError};
use crate::hub::Hub;
use crate::session::run_session;

#[derive(Clone)]
struct AppState {
    hub: Arc<Hub>,
    shutdown: CancellationToken,
}

pub fn router(hub: Arc<Hub>, shutdown: CancellationToken) -> Router {
    Router::new()
        .route("/catalog", get(catalog))
        .route("/diagnostics", get(diagnostics))
        .route("/ws", get(ws))
        .with_state(AppState { hub, shutdown })
}

async fn catalog(State(app): State<AppState>) -> impl IntoResponse {
    (
        [
            (header::CONTENT_TYPE, "application/json"),
            (header::ACCESS_CONTROL_ALLOW_ORIGIN, "*"),
        ],
        app.hub.catalog().document().to_string(),
    )
}

async fn diagnostics(State(app): State<AppState>) -> impl IntoResponse {
    (
        [(header::ACCESS_CONTROL_ALLOW_ORIGIN, "*")],
        Json(app.hub.diagnostics()),
    )
}

async fn ws(State(app): State<AppState>, upgrade: WebSocketUpgrade) -> impl IntoResponse {
    upgrade.on_upgrade(move |socket| websocket_session(app, socket))
}

async fn websocket_session(app: AppState, socket: WebSocket) {
    let (sink, stream) = socket.split();
    let frames = stream
        .take_while(|m| futures::future::ready(!matches!(m, Ok(Message::Close(_)) | Err(_))))
        .filter_map(|m| {
            futures::future::ready(match m {
                Ok(Message::Binary(b)) => Some(Frame::from_bytes(&b)),
                Ok(Message::Text(t)) => Some(Ok(Frame::Json(Bytes::copy_from_slice(t.as_bytes())))),
                Ok(_) => None,
                Err(e) => Some(Err(FrameError::Io(std::io::Error::other(e)))),
            })
        });
    let sink = sink.with(|frame: Frame| {
        futures::future::ready(Ok::<_, axum::Error>(Message::Binary(
            frame.to_bytes().into(),
        )))
    });
    run_session(app.hub, Box::pin(frames), Box::pin(sink), app.shutdown).await;
}
