//! Relay server for emotional-teaser voice messages.
//!
//! Clients hold one persistent connection, pair 1:1, upload audio for a
//! recommendation, and send it with a chosen teaser id. The server logs
//! every message, stores audio by digest and delivers to the peer, queueing
//! while the peer is offline.

pub mod client;
pub mod config;
pub mod frame;
pub mod http;
pub mod hub;
pub mod protocol;
pub mod server;
pub mod session;
pub mod store;
pub mod transcribe;

pub use client::{Client, ClientError, RecommendationReply};
pub use config::{ConfigError, ServerConfig};
pub use frame::{Frame, FrameCodec, FrameError};
pub use hub::{Hub, HubConfig};
pub use protocol::{ClientMessage, ErrorCode, MessageEnvelope, ServerMessage};
pub use server::{Server, ServerError, ServerHandle};
pub use store::{Store, StoreError};
