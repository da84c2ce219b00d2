//! One client connection. Generic over the frame transport so the TCP
//! listener and the WebSocket endpoint share the same state machine.

use std::fmt::Display;
use std::sync::Arc;
use std::time::Duration;

use futures::{Sink, SinkExt, Stream, StreamExt};
use tokio::sync::mpsc;
use tokio_util::sync::CancellationToken;

use crate::frame::{Frame, FrameError};
use crate::hub::{ConnId, Hub, Outbox, Rejection};
use crate::protocol::{ClientMessage, ErrorCode, ServerMessage};

const MAX_UPLOAD_ID_LEN: usize = 128;

#[derive(Debug, PartialEq, Eq)]
enum Flow {
    Continue,
    Close,
}

struct Session {
    hub: Arc<Hub>,
    conn: ConnId,
    outbox: Outbox,
    user: Option<String>,
    /// Set by UPLOAD_META until the binary frame arrives.
    awaiting_audio: Option<Option<String>>,
}

impl Session {
    fn push(&self, message: &ServerMessage) {
        let _ = self.outbox.send(vec![Frame::json(message)]);
    }

    fn reject(&self, rejection: Rejection) {
        self.push(&rejection.to_message());
    }

    fn user(&self) -> Result<&str, Rejection> {
        self.user
            .as_deref()
            .ok_or_else(|| Rejection::new(ErrorCode::NoSession, "send HELLO first"))
    }

    async fn handle(&mut self, frame: Frame) -> Flow {
        match frame {
            Frame::Binary(bytes) => {
                let Some(upload_id) = self.awaiting_audio.take() else {
                    self.reject(Rejection::new(
                        ErrorCode::MalformedFrame,
                        "binary frame without UPLOAD_META",
                    ));
                    return Flow::Continue;
                };
                let result = match self.user() {
                    Ok(user) => self.hub.upload(user, upload_id.clone(), bytes).await,
                    Err(e) => Err(e),
                };
                match result {
                    Ok(reply) => self.push(&reply),
                    Err(r) => self.push(&ServerMessage::Error {
                        code: r.code,
                        detail: r.detail,
                        upload_id,
                    }),
                }
                Flow::Continue
            }
            Frame::Json(bytes) => {
                if self.awaiting_audio.take().is_some() {
                    self.reject(Rejection::new(
                        ErrorCode::MalformedFrame,
                        "expected binary audio after UPLOAD_META",
                    ));
                }
                match serde_json::from_slice::<ClientMessage>(&bytes) {
                    Ok(message) => self.dispatch(message).await,
                    Err(e) => {
                        self.reject(Rejection::new(ErrorCode::MalformedFrame, e.to_string()));
                        Flow::Continue
                    }
                }
            }
        }
    }

    async fn dispatch(&mut self, message: ClientMessage) -> Flow {
        let result = match message {
            ClientMessage::Hello { user_id } => {
                if self.user.is_some() {
                    Err(Rejection::new(
                        ErrorCode::MalformedFrame,
                        "HELLO already accepted",
                    ))
                } else {
                    self.hub
                        .hello(self.conn, &self.outbox, &user_id)
                        .map(|()| self.user = Some(user_id))
                }
            }
            ClientMessage::Pair { peer_id } => match self.user() {
                Ok(user) => self.hub.pair(user, &peer_id).map(drop),
                Err(e) => Err(e),
            },
            ClientMessage::UploadMeta { upload_id } => match upload_id {
                Some(id) if id.is_empty() || id.len() > MAX_UPLOAD_ID_LEN => Err(Rejection::new(
                    ErrorCode::MalformedFrame,
                    "upload_id must be 1 to 128 bytes",
                )),
                upload_id => {
                    self.awaiting_audio = Some(upload_id);
                    Ok(())
                }
            },
            ClientMessage::Send {
                upload_id,
                teaser_id,
            } => match self.user() {
                Ok(user) => self
                    .hub
                    .send(user, &upload_id, &teaser_id)
                    .await
                    .map(|message_id| self.push(&ServerMessage::SendOk { message_id })),
                Err(e) => Err(e),
            },
            ClientMessage::FetchAudio { message_id } => match self.user() {
                Ok(user) => self
                    .hub
                    .fetch_audio(user, &message_id)
                    .await
                    .map(|(digest, wav)| {
                        let _ = self.outbox.send(vec![
                            Frame::json(&ServerMessage::Audio {
                                message_id,
                                audio_digest: digest,
                            }),
                            Frame::Binary(wav.into()),
                        ]);
                    }),
                Err(e) => Err(e),
            },
            ClientMessage::Bye => return Flow::Close,
        };
        if let Err(r) = result {
            self.reject(r);
        }
        Flow::Continue
    }

    fn close(&mut self) {
        if let Some(user) = self.user.take() {
            self.hub.disconnect(&user, self.conn);
        }
    }
}

async fn write_loop<W>(mut rx: mpsc::UnboundedReceiver<Vec<Frame>>, mut sink: W)
where
    W: Sink<Frame> + Unpin,
    W::Error: Display,
{
    while let Some(batch) = rx.recv().await {
        for frame in batch {
            if let Err(e) = sink.feed(frame).await {
                tracing::debug!(error = %e, "write failed");
                return;
            }
        }
        if let Err(e) = sink.flush().await {
            tracing::debug!(error = %e, "flush failed");
            return;
        }
    }
    let _ = sink.close().await;
}

/// Drives one connection until the peer leaves, sends BYE, breaks framing,
/// or `shutdown` fires.
pub async fn run_session<R, W>(hub: Arc<Hub>, mut reader: R, writer: W, shutdown: CancellationToken)
where
    R: Stream<Item = Result<Frame, FrameError>> + Unpin,
    W: Sink<Frame> + Unpin + Send + 'static,
    W::Error: Display,
{
    let (tx, rx) = mpsc::unbounded_channel();
    let writer = tokio::spawn(write_loop(rx, writer));
    let mut session = Session {
        conn: hub.next_conn_id(),
        hub,
        outbox: tx,
        user: None,
        awaiting_audio: None,
    };
    loop {
        let next = tokio::select! {
            _ = shutdown.cancelled() => break,
            next = reader.next() => next,
        };
        match next {
            None => break,
            Some(Err(e)) => {
                // framing is lost; report and hang up
                session.reject(Rejection::new(ErrorCode::MalformedFrame, e.to_string()));
                break;
            }
            Some(Ok(frame)) => {
                if session.handle(frame).await == Flow::Close {
                    break;
                }
            }
        }
    }
    session.close();
    drop(session);
    let _ = tokio::time::timeout(Duration::from_secs(5), writer).await;
}
