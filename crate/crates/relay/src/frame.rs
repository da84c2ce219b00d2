//! Length-prefixed framing.
//!
//! ```text
//! +----------------+--------+-----------------+
//! | length: u32 BE | kind   | payload         |
//! +----------------+--------+-----------------+
//! ```
//!
//! `length` counts the kind byte plus the payload. Kind 0 is a UTF-8 JSON
//! control message, kind 1 is binary audio.

use bytes::{Buf, BufMut, Bytes, BytesMut};
use thiserror::Error;
use tokio_util::codec::{Decoder, Encoder};

pub const KIND_JSON: u8 = 0;
pub const KIND_BINARY: u8 = 1;

/// Largest accepted `length` field.
pub const MAX_FRAME_LEN: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Json(Bytes),
    Binary(Bytes),
}

impl Frame {
    pub fn json<T: serde::Serialize>(value: &T) -> Frame {
        Frame::Json(Bytes::from(
            serde_json::to_vec(value).expect("protocol types serialize"),
        ))
    }

    pub fn kind(&self) -> u8 {
        match self {
            Frame::Json(_) => KIND_JSON,
            Frame::Binary(_) => KIND_BINARY,
        }
    }

    pub fn payload(&self) -> &Bytes {
        match self {
            Frame::Json(b) | Frame::Binary(b) => b,
        }
    }

    /// Wire encoding of a single frame.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = BytesMut::new();
        FrameCodec::default()
            .encode(self.clone(), &mut buf)
            .expect("frame within size limit");
        buf.to_vec()
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Frame, FrameError> {
        let mut buf = BytesMut::from(bytes);
        match FrameCodec::default().decode(&mut buf)? {
            Some(frame) if buf.is_empty() => Ok(frame),
            Some(_) => Err(FrameError::TrailingBytes(buf.len())),
            None => Err(FrameError::Incomplete),
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame length {0} exceeds limit")]
    TooLarge(usize),
    #[error("zero-length frame")]
    Empty,
    #[error("unknown frame kind {0}")]
    UnknownKind(u8),
    #[error("incomplete frame")]
    Incomplete,
    #[error("{0} bytes after frame")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct FrameCodec {
    max_len: usize,
}

impl Default for FrameCodec {
    fn default() -> Self {
        Self {
            max_len: MAX_FRAME_LEN,
        }
    }
}

impl FrameCodec {
    pub fn with_max_len(max_len: usize) -> Self {
        Self { max_len }
    }
}

impl Decoder for FrameCodec {
    type Item = Frame;
    type Error = FrameError;

    fn decode(&mut self, src: &mut BytesMut) -> Result<Option<Frame>, FrameError> {
        if src.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_be_bytes(src[..4].try_into().unwrap()) as usize;
        if len == 0 {
            return Err(FrameError::Empty);
        }
        if len > self.max_len {
            return Err(FrameError::TooLarge(len));
        }
        if src.len() < 4 + len {
            src.reserve(4 + len - src.len());
            return Ok(None);
        }
        src.advance(4);
        let kind = src.get_u8();
        let payload = src.split_to(len - 1).freeze();
        match kind {
            KIND_JSON => Ok(Some(Frame::Json(payload))),
            KIND_BINARY => Ok(Some(Frame::Binary(payload))),
            other => Err(FrameError::UnknownKind(other)),
        }
    }
}

impl Encoder<Frame> for FrameCodec {
    type Error = FrameError;

    fn encode(&mut self, frame: Frame, dst: &mut BytesMut) -> Result<(), FrameError> {
        let len = frame.payload().len() + 1;
        if len > self.max_len {
            return Err(FrameError::TooLarge(len));
        }
        dst.reserve(4 + len);
        dst.put_u32(len as u32);
        dst.put_u8(frame.kind());
        dst.extend_from_slice(frame.payload());
        Ok(())
    }
}
