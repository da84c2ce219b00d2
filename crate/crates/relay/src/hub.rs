//! Shared relay state and the request handlers, independent of transport.
//!
//! Locking: `state` is a plain mutex that is never held across an await.
//! Each conversation has its own async mutex that serializes appends and
//! keeps `sent_at` non-decreasing; classification runs on the blocking pool
//! with no lock held.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use teaser_core::audio::{parse_wav_capped, AudioClip};
use teaser_core::catalog::Catalog;
use teaser_core::classify::transcribe::{Transcriber, TranscriptionError};
use teaser_core::emotion::Emotion;
use teaser_core::fusion::{Modality, Recommendation};
use teaser_core::pipeline::Pipeline;
use tokio::sync::mpsc;

use crate::frame::Frame;
use crate::protocol::{
    conversation_id, parties, validate_user_id, ErrorCode, MessageEnvelope, ServerMessage,
};
use crate::store::{MessageRecord, Store, StoreError};

pub const DEFAULT_UPLOAD_TTL: Duration = Duration::from_secs(300);
pub const DEFAULT_CLASSIFY_TIMEOUT: Duration = Duration::from_secs(10);

/// Frames queued to one connection. A batch is written without anything
/// interleaved.
pub type Outbox = mpsc::UnboundedSender<Vec<Frame>>;

pub type ConnId = u64;

#[derive(Debug, Clone)]
pub struct HubConfig {
    pub upload_ttl: Duration,
    pub max_duration_ms: u64,
    /// Budget for the transcription leg of one upload.
    pub classify_timeout: Duration,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            upload_ttl: DEFAULT_UPLOAD_TTL,
            max_duration_ms: teaser_core::audio::DEFAULT_MAX_DURATION_MS,
            classify_timeout: DEFAULT_CLASSIFY_TIMEOUT,
        }
    }
}

/// A failed request: becomes an ERROR frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub code: ErrorCode,
    pub detail: String,
}

impl Rejection {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }

    pub fn to_message(&self) -> ServerMessage {
        ServerMessage::error(self.code, self.detail.clone())
    }
}

impl From<StoreError> for Rejection {
    fn from(e: StoreError) -> Self {
        tracing::error!(error = %e, "storage failure");
        Rejection::new(ErrorCode::Internal, "storage failure")
    }
}

#[derive(Debug, Clone)]
pub struct PendingUpload {
    pub clip: Arc<AudioClip>,
    pub recommendation: Recommendation,
    pub modality: Modality,
    pub expires_at: Instant,
}

struct LiveSession {
    conn: ConnId,
    outbox: Outbox,
}

#[derive(Default)]
struct State {
    sessions: HashMap<String, LiveSession>,
    /// Symmetric; survives disconnects so messages can queue.
    pairs: HashMap<String, String>,
    uploads: HashMap<(String, String), PendingUpload>,
    queues: HashMap<String, VecDeque<MessageEnvelope>>,
    index: HashMap<String, MessageRecord>,
}

/// Read-only view served by the diagnostics endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub fusion_weights: FusionView,
    pub catalog_version: String,
    pub catalog_entries: usize,
    pub emotions: [&'static str; 6],
    pub speech_model: &'static str,
    pub upload_ttl_ms: u64,
    pub max_duration_ms: u64,
    pub classify_timeout_ms: u64,
    pub live_sessions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionView {
    pub speech: f64,
    pub text: f64,
    pub normalized: [f64; 2],
}

pub struct Hub {
    pipeline: Arc<Pipeline>,
    transcriber: Arc<dyn Transcriber>,
    catalog: Arc<Catalog>,
    store: Store,
    config: HubConfig,
    state: Mutex<State>,
    conversations: Mutex<HashMap<String, Arc<tokio::sync::Mutex<u64>>>>,
    next_conn: AtomicU64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn deliver(envelope: MessageEnvelope) -> Frame {
    Frame::json(&ServerMessage::Deliver { envelope })
}

impl Hub {
    /// Rebuilds the message index and per-conversation clocks from `store`.
    pub fn new(
        pipeline: Arc<Pipeline>,
        transcriber: Arc<dyn Transcriber>,
        catalog: Arc<Catalog>,
        store: Store,
        config: HubConfig,
    ) -> Result<Self, StoreError> {
        let index = store.index()?;
        let clocks = store
            .last_sent_at()?
            .into_iter()
            .map(|(c, t)| (c, Arc::new(tokio::sync::Mutex::new(t))))
            .collect();
        Ok(Self {
            pipeline,
            transcriber,
            catalog,
            store,
            config,
            state: Mutex::new(State {
                index,
                ..State::default()
            }),
            conversations: Mutex::new(clocks),
            next_conn: AtomicU64::new(1),
        })
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn next_conn_id(&self) -> ConnId {
        self.next_conn.fetch_add(1, Ordering::Relaxed)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let w = self.pipeline.weights();
        let (ns, nt) = w.normalized();
        Diagnostics {
            fusion_weights: FusionView {
                speech: w.speech(),
                text: w.text(),
                normalized: [ns, nt],
            },
            catalog_version: self.catalog.version().to_string(),
            catalog_entries: self.catalog.len(),
            emotions: Emotion::names(),
            speech_model: if self.pipeline.model().is_some() {
                "model"
            } else {
                "heuristic"
            },
            upload_ttl_ms: self.config.upload_ttl.as_millis() as u64,
            max_duration_ms: self.config.max_duration_ms,
            classify_timeout_ms: self.config.classify_timeout.as_millis() as u64,
            live_sessions: self.state().sessions.len(),
        }
    }

    /// Registers `user_id` on connection `conn`. HELLO_OK, PAIRED (if the
    /// user is paired) and any queued DELIVERs go out as one batch.
    pub fn hello(&self, conn: ConnId, outbox: &Outbox, user_id: &str) -> Result<(), Rejection> {
        validate_user_id(user_id).map_err(|e| Rejection::new(ErrorCode::MalformedFrame, e))?;
        let mut st = self.state();
        if st.sessions.contains_key(user_id) {
            return Err(Rejection::new(
                ErrorCode::DuplicateUser,
                format!("{user_id} is already connected"),
            ));
        }
        let mut batch = vec![Frame::json(&ServerMessage::HelloOk {
            catalog_version: self.catalog.version().to_string(),
            emotions: Emotion::names().iter().map(|s| s.to_string()).collect(),
        })];
        if let Some(peer) = st.pairs.get(user_id) {
            batch.push(Frame::json(&ServerMessage::Paired {
                conversation_id: conversation_id(user_id, peer),
                peer_id: peer.clone(),
            }));
        }
        let queued = st.queues.remove(user_id).unwrap_or_default();
        let flushed = queued.len();
        batch.extend(queued.into_iter().map(deliver));
        if outbox.send(batch).is_err() {
            return Ok(());
        }
        st.sessions.insert(
            user_id.to_string(),
            LiveSession {
                conn,
                outbox: outbox.clone(),
            },
        );
        tracing::info!(user = user_id, flushed, "session open");
        Ok(())
    }

    /// Removes the session if it still belongs to `conn`. Pairing and
    /// pending uploads are kept.
    pub fn disconnect(&self, user_id: &str, conn: ConnId) {
        let mut st = self.state();
        if st.sessions.get(user_id).is_some_and(|s| s.conn == conn) {
            st.sessions.remove(user_id);
            tracing::info!(user = user_id, "session closed");
        }
    }

    pub fn pair(&self, user_id: &str, peer_id: &str) -> Result<String, Rejection> {
        let conversation = {
            let mut st = self.state();
            if let Some(current) = st.pairs.get(user_id) {
                return Err(Rejection::new(
                    ErrorCode::AlreadyPaired,
                    format!("already paired with {current}"),
                ));
            }
            if peer_id == user_id || !st.sessions.contains_key(peer_id) {
                return Err(Rejection::new(
                    ErrorCode::PeerUnavailable,
                    format!("{peer_id} is not available"),
                ));
            }
            if st.pairs.contains_key(peer_id) {
                return Err(Rejection::new(
                    ErrorCode::AlreadyPaired,
                    format!("{peer_id} is already paired"),
                ));
            }
            st.pairs.insert(user_id.to_string(), peer_id.to_string());
            st.pairs.insert(peer_id.to_string(), user_id.to_string());
            let conversation = conversation_id(user_id, peer_id);
            for (me, other) in [(user_id, peer_id), (peer_id, user_id)] {
                if let Some(s) = st.sessions.get(me) {
                    let _ = s.outbox.send(vec![Frame::json(&ServerMessage::Paired {
                        conversation_id: conversation.clone(),
                        peer_id: other.to_string(),
                    })]);
                }
            }
            conversation
        };
        self.store.ensure_log(&conversation)?;
        tracing::info!(conversation = %conversation, "paired");
        Ok(conversation)
    }

    pub fn peer_of(&self, user_id: &str) -> Option<String> {
        self.state().pairs.get(user_id).cloned()
    }

    /// Ingest, classify and hold an upload until SEND or expiry.
    pub async fn upload(
        &self,
        user_id: &str,
        upload_id: Option<String>,
        bytes: bytes::Bytes,
    ) -> Result<ServerMessage, Rejection> {
        if self.peer_of(user_id).is_none() {
            return Err(Rejection::new(
                ErrorCode::NotPaired,
                "pair before uploading",
            ));
        }
        let max_ms = self.config.max_duration_ms;
        let clip = tokio::task::spawn_blocking(move || parse_wav_capped(&bytes, max_ms))
            .await
            .map_err(|e| Rejection::new(ErrorCode::Internal, e.to_string()))?
            .map_err(|e| Rejection::new(ErrorCode::UploadRejected, format!("{}: {e}", e.code())))?;
        let clip = Arc::new(clip);

        let pipeline = self.pipeline.clone();
        let speech_clip = clip.clone();
        let speech = tokio::task::spawn_blocking(move || pipeline.speech(&speech_clip));
        let transcriber = self.transcriber.clone();
        let text_clip = clip.clone();
        let text = tokio::time::timeout(
            self.config.classify_timeout,
            tokio::task::spawn_blocking(move || transcriber.transcribe(&text_clip)),
        );
        let (speech, text) = tokio::join!(speech, text);
        let (features, p_s, source) = speech
            .map_err(|e| Rejection::new(ErrorCode::Internal, e.to_string()))?
            .map_err(|e| Rejection::new(ErrorCode::ClassificationFailed, e.to_string()))?;
        let transcript = match text {
            Ok(Ok(result)) => result,
            Ok(Err(join)) => Err(TranscriptionError::Unavailable(join.to_string())),
            Err(_) => Err(TranscriptionError::Unavailable("timed out".into())),
        };
        if let Err(e) = &transcript {
            tracing::warn!(user = user_id, error = %e, "transcription unavailable, speech only");
        }
        let analysis = self.pipeline.combine(features, p_s, source, transcript);

        let upload_id = upload_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        let reply = ServerMessage::Recommendation {
            upload_id: upload_id.clone(),
            order: analysis.recommendation.order_indices(),
            probs: *analysis.fused().probs(),
            modality: analysis.modality,
        };
        let now = Instant::now();
        let mut st = self.state();
        // forget uploads that expired a full TTL ago
        let ttl = self.config.upload_ttl;
        st.uploads.retain(|_, u| u.expires_at + ttl > now);
        st.uploads.insert(
            (user_id.to_string(), upload_id),
            PendingUpload {
                clip,
                recommendation: analysis.recommendation,
                modality: analysis.modality,
                expires_at: now + ttl,
            },
        );
        Ok(reply)
    }

    fn conversation_lock(&self, conversation: &str) -> Arc<tokio::sync::Mutex<u64>> {
        self.conversations
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(conversation.to_string())
            .or_default()
            .clone()
    }

    /// Logs the message, then delivers it to the peer or queues it.
    pub async fn send(
        &self,
        user_id: &str,
        upload_id: &str,
        teaser_id: &str,
    ) -> Result<String, Rejection> {
        let peer = self
            .peer_of(user_id)
            .ok_or_else(|| Rejection::new(ErrorCode::NotPaired, "not paired"))?;
        let key = (user_id.to_string(), upload_id.to_string());
        let upload = {
            let mut st = self.state();
            let expires_at = st
                .uploads
                .get(&key)
                .ok_or_else(|| Rejection::new(ErrorCode::UnknownUpload, upload_id.to_string()))?
                .expires_at;
            if expires_at <= Instant::now() {
                st.uploads.remove(&key);
                return Err(Rejection::new(
                    ErrorCode::UploadExpired,
                    upload_id.to_string(),
                ));
            }
            // the upload stays usable after a bad teaser id
            self.catalog
                .resolve(teaser_id)
                .map_err(|_| Rejection::new(ErrorCode::UnknownTeaser, teaser_id.to_string()))?;
            st.uploads.remove(&key).expect("checked above")
        };

        let store = self.store.clone();
        let clip = upload.clip.clone();
        let digest = tokio::task::spawn_blocking(move || store.put_blob(&clip))
            .await
            .map_err(|e| Rejection::new(ErrorCode::Internal, e.to_string()))??;

        let conversation = conversation_id(user_id, &peer);
        let lock = self.conversation_lock(&conversation);
        let mut last = lock.lock().await;
        let envelope = MessageEnvelope {
            message_id: uuid::Uuid::new_v4().to_string(),
            conversation_id: conversation.clone(),
            sender: user_id.to_string(),
            audio_digest: digest.clone(),
            duration_ms: upload.clip.duration_ms(),
            teaser_id: teaser_id.to_string(),
            modality: upload.modality,
            sent_at: now_ms().max(*last),
        };
        let store = self.store.clone();
        let logged = envelope.clone();
        tokio::task::spawn_blocking(move || store.append(&logged))
            .await
            .map_err(|e| Rejection::new(ErrorCode::Internal, e.to_string()))??;
        *last = envelope.sent_at;

        let message_id = envelope.message_id.clone();
        let mut st = self.state();
        st.index.insert(
            message_id.clone(),
            MessageRecord {
                conversation_id: conversation,
                audio_digest: digest,
            },
        );
        let live = st
            .sessions
            .get(&peer)
            .map(|s| s.outbox.send(vec![deliver(envelope.clone())]).is_ok())
            .unwrap_or(false);
        if !live {
            st.queues.entry(peer).or_default().push_back(envelope);
        }
        drop(st);
        drop(last);
        Ok(message_id)
    }

    /// Canonical WAV of a logged message, for either party.
    pub async fn fetch_audio(
        &self,
        user_id: &str,
        message_id: &str,
    ) -> Result<(String, Vec<u8>), Rejection> {
        let record = self
            .state()
            .index
            .get(message_id)
            .cloned()
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownMessage, message_id.to_string()))?;
        let (a, b) = parties(&record.conversation_id)
            .ok_or_else(|| Rejection::new(ErrorCode::Internal, "bad conversation id"))?;
        if user_id != a && user_id != b {
            return Err(Rejection::new(
                ErrorCode::Forbidden,
                format!("{user_id} is not part of {}", record.conversation_id),
            ));
        }
        let store = self.store.clone();
        let digest = record.audio_digest.clone();
        let bytes = tokio::task::spawn_blocking(move || store.read_blob(&digest))
            .await
            .map_err(|e| Rejection::new(ErrorCode::Internal, e.to_string()))??;
        Ok((record.audio_digest, bytes))
    }

    pub fn replay_log(&self, conversation: &str) -> Result<Vec<MessageEnvelope>, StoreError> {
        self.store.replay_log(conversation)
    }

    /// Messages waiting for `user_id` to reconnect.
    pub fn queued_for(&self, user_id: &str) -> usize {
        self.state().queues.get(user_id).map_or(0, VecDeque::len)
    }

    pub fn pending_upload(&self, user_id: &str, upload_id: &str) -> Option<PendingUpload> {
        self.state()
            .uploads
            .get(&(user_id.to_string(), upload_id.to_string()))
            .cloned()
    }
}
