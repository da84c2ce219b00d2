//! Protocol client over TCP. Replies are matched to requests; DELIVER and
//! peer-initiated PAIRED frames that arrive in between are buffered.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::time::Duration;

use bytes::Bytes;
use futures::{SinkExt, StreamExt};
use teaser_core::emotion::NUM_EMOTIONS;
use teaser_core::fusion::Modality;
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_util::codec::Framed;

use crate::frame::{Frame, FrameCodec, FrameError};
use crate::protocol::{ClientMessage, ErrorCode, MessageEnvelope, ServerMessage};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("connection closed")]
    Closed,
    #[error("timed out")]
    Timeout,
    #[error("{code}: {detail}")]
    Server { code: ErrorCode, detail: String },
    #[error("unexpected frame: {0}")]
    Unexpected(String),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Server { code, .. } => Some(*code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationReply {
    pub upload_id: String,
    pub order: [usize; NUM_EMOTIONS],
    pub probs: [f64; NUM_EMOTIONS],
    pub modality: Modality,
}

pub struct Client {
    framed: Framed<TcpStream, FrameCodec>,
    inbox: VecDeque<ServerMessage>,
    timeout: Duration,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)
            .await
            .map_err(|e| ClientError::Frame(e.into()))?;
        stream
            .set_nodelay(true)
            .map_err(|e| ClientError::Frame(e.into()))?;
        Ok(Self {
            framed: Framed::new(stream, FrameCodec::default()),
            inbox: VecDeque::new(),
            timeout: Duration::from_secs(30),
        })
    }

    /// Per-read timeout, 30 s by default.
    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    pub async fn send_message(&mut self, message: &ClientMessage) -> Result<(), ClientError> {
        self.send_frame(Frame::json(message)).await
    }

    pub async fn send_frame(&mut self, frame: Frame) -> Result<(), ClientError> {
        Ok(self.framed.send(frame).await?)
    }

    pub async fn recv_frame(&mut self) -> Result<Frame, ClientError> {
        match tokio::time::timeout(self.timeout, self.framed.next()).await {
            Err(_) => Err(ClientError::Timeout),
            Ok(None) => Err(ClientError::Closed),
            Ok(Some(frame)) => Ok(frame?),
        }
    }

    async fn recv_message(&mut self) -> Result<ServerMessage, ClientError> {
        match self.recv_frame().await? {
            Frame::Json(b) => serde_json::from_slice(&b)
                .map_err(|e| ClientError::Unexpected(format!("bad json: {e}"))),
            Frame::Binary(b) => Err(ClientError::Unexpected(format!("{} binary bytes", b.len()))),
        }
    }

    /// Reads until `pick` accepts a message; ERROR ends the wait, anything
    /// else is buffered.
    async fn wait_for<T>(
        &mut self,
        mut pick: impl FnMut(&ServerMessage) -> Option<T>,
    ) -> Result<T, ClientError> {
        loop {
            let m = self.recv_message().await?;
            if let Some(t) = pick(&m) {
                return Ok(t);
            }
            if let ServerMessage::Error { code, detail, .. } = m {
                return Err(ClientError::Server { code, detail });
            }
            self.inbox.push_back(m);
        }
    }

    pub async fn hello(&mut self, user_id: &str) -> Result<(String, Vec<String>), ClientError> {
        self.send_message(&ClientMessage::Hello {
            user_id: user_id.into(),
        })
        .await?;
        self.wait_for(|m| match m {
            ServerMessage::HelloOk {
                catalog_version,
                emotions,
            } => Some((catalog_version.clone(), emotions.clone())),
            _ => None,
        })
        .await
    }

    /// Returns the conversation id.
    pub async fn pair(&mut self, peer_id: &str) -> Result<String, ClientError> {
        self.send_message(&ClientMessage::Pair {
            peer_id: peer_id.into(),
        })
        .await?;
        self.wait_for(|m| match m {
            ServerMessage::Paired {
                conversation_id, ..
            } => Some(conversation_id.clone()),
            _ => None,
        })
        .await
    }

    pub async fn upload(
        &mut self,
        wav: impl Into<Bytes>,
        upload_id: Option<&str>,
    ) -> Result<RecommendationReply, ClientError> {
        self.send_message(&ClientMessage::UploadMeta {
            upload_id: upload_id.map(str::to_string),
        })
        .await?;
        self.send_frame(Frame::Binary(wav.into())).await?;
        self.wait_for(|m| match m {
            ServerMessage::Recommendation {
                upload_id,
                order,
                probs,
                modality,
            } => Some(RecommendationReply {
                upload_id: upload_id.clone(),
                order: *order,
                probs: *probs,
                modality: *modality,
            }),
            _ => None,
        })
        .await
    }

    /// Returns the message id.
    pub async fn send_teaser(
        &mut self,
        upload_id: &str,
        teaser_id: &str,
    ) -> Result<String, ClientError> {
        self.send_message(&ClientMessage::Send {
            upload_id: upload_id.into(),
            teaser_id: teaser_id.into(),
        })
        .await?;
        self.wait_for(|m| match m {
            ServerMessage::SendOk { message_id } => Some(message_id.clone()),
            _ => None,
        })
        .await
    }

    /// Returns the announced digest and the WAV bytes.
    pub async fn fetch_audio(&mut self, message_id: &str) -> Result<(String, Bytes), ClientError> {
        self.send_message(&ClientMessage::FetchAudio {
            message_id: message_id.into(),
        })
        .await?;
        let digest = self
            .wait_for(|m| match m {
                ServerMessage::Audio { audio_digest, .. } => Some(audio_digest.clone()),
                _ => None,
            })
            .await?;
        match self.recv_frame().await? {
            Frame::Binary(b) => Ok((digest, b)),
            Frame::Json(b) => Err(ClientError::Unexpected(String::from_utf8_lossy(&b).into())),
        }
    }

    fn take_buffered(&mut self, pick: impl Fn(&ServerMessage) -> bool) -> Option<ServerMessage> {
        let at = self.inbox.iter().position(pick)?;
        self.inbox.remove(at)
    }

    pub async fn next_deliver(&mut self) -> Result<MessageEnvelope, ClientError> {
        let is_deliver = |m: &ServerMessage| matches!(m, ServerMessage::Deliver { .. });
        if let Some(ServerMessage::Deliver { envelope }) = self.take_buffered(is_deliver) {
            return Ok(envelope);
        }
        self.wait_for(|m| match m {
            ServerMessage::Deliver { envelope } => Some(envelope.clone()),
            _ => None,
        })
        .await
    }

    /// Waits for a PAIRED frame, e.g. when the peer initiated pairing.
    pub async fn next_paired(&mut self) -> Result<String, ClientError> {
        let is_paired = |m: &ServerMessage| matches!(m, ServerMessage::Paired { .. });
        if let Some(ServerMessage::Paired {
            conversation_id, ..
        }) = self.take_buffered(is_paired)
        {
            return Ok(conversation_id);
        }
        self.wait_for(|m| match m {
            ServerMessage::Paired {
                conversation_id, ..
            } => Some(conversation_id.clone()),
            _ => None,
        })
        .await
    }

    /// Messages received but not yet consumed.
    pub fn buffered(&self) -> impl Iterator<Item = &ServerMessage> {
        self.inbox.iter()
    }

    /// Sends BYE and waits for the server to close the connection.
    pub async fn bye(mut self) -> Result<Vec<ServerMessage>, ClientError> {
        self.send_message(&ClientMessage::Bye).await?;
        loop {
            match self.recv_frame().await {
                Ok(Frame::Json(b)) => {
                    if let Ok(m) = serde_json::from_slice(&b) {
                        self.inbox.push_back(m);
                    }
                }
                Ok(Frame::Binary(_)) => {}
                Err(ClientError::Closed) => return Ok(self.inbox.into()),
                Err(ClientError::Frame(FrameError::Io(_))) => return Ok(self.inbox.into()),
                Err(e) => return Err(e),
            }
        }
    }
}
