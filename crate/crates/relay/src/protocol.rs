//! JSON control messages carried in kind-0 frames. Every message is an
//! object tagged by `"type"`.

use std::fmt;

use serde::{Deserialize, Serialize};
use teaser_core::emotion::NUM_EMOTIONS;
use teaser_core::fusion::Modality;

pub const MAX_USER_ID_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClientMessage {
    Hello {
        user_id: String,
    },
    Pair {
        peer_id: String,
    },
    /// Announces the binary audio frame that follows.
    UploadMeta {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upload_id: Option<String>,
    },
    Send {
        upload_id: String,
        teaser_id: String,
    },
    FetchAudio {
        message_id: String,
    },
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ServerMessage {
    HelloOk {
        catalog_version: String,
        emotions: Vec<String>,
    },
    Paired {
        conversation_id: String,
        peer_id: String,
    },
    Recommendation {
        upload_id: String,
        order: [usize; NUM_EMOTIONS],
        probs: [f64; NUM_EMOTIONS],
        modality: Modality,
    },
    SendOk {
        message_id: String,
    },
    Deliver {
        envelope: MessageEnvelope,
    },
    /// Precedes the binary frame holding the canonical WAV.
    Audio {
        message_id: String,
        audio_digest: String,
    },
    Error {
        code: ErrorCode,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upload_id: Option<String>,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            detail: detail.into(),
            upload_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    DuplicateUser,
    MalformedFrame,
    /// A request that needs a session arrived before HELLO.
    NoSession,
    PeerUnavailable,
    AlreadyPaired,
    NotPaired,
    #[serde(rename = "UPLOAD_REJECTED")]
    UploadRejected,
    ClassificationFailed,
    UnknownUpload,
    UploadExpired,
    UnknownTeaser,
    UnknownMessage,
    Forbidden,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::DuplicateUser => "DuplicateUser",
            ErrorCode::MalformedFrame => "MalformedFrame",
            ErrorCode::NoSession => "NoSession",
            ErrorCode::PeerUnavailable => "PeerUnavailable",
            ErrorCode::AlreadyPaired => "AlreadyPaired",
            ErrorCode::NotPaired => "NotPaired",
            ErrorCode::UploadRejected => "UPLOAD_REJECTED",
            ErrorCode::ClassificationFailed => "ClassificationFailed",
            ErrorCode::UnknownUpload => "UnknownUpload",
            ErrorCode::UploadExpired => "UploadExpired",
            ErrorCode::UnknownTeaser => "UnknownTeaser",
            ErrorCode::UnknownMessage => "UnknownMessage",
            ErrorCode::Forbidden => "Forbidden",
            ErrorCode::Internal => "Internal",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One relayed message as logged and delivered. Field order is the
/// serialization order and must stay stable: log lines are compared
/// byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEnvelope {
    pub message_id: String,
    pub conversation_id: String,
    pub sender: String,
    pub audio_digest: String,
    pub duration_ms: u64,
    pub teaser_id: String,
    pub modality: Modality,
    /// UTC milliseconds.
    pub sent_at: u64,
}

impl MessageEnvelope {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }
}

/// User ids are 1 to 64 characters from `[A-Za-z0-9._@-]`, which keeps
/// them free of the conversation separator and safe in file names.
pub fn validate_user_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("user_id is empty".into());
    }
    if id.len() > MAX_USER_ID_LEN {
        return Err(format!("user_id longer than {MAX_USER_ID_LEN} bytes"));
    }
    match id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '@' | '-')))
    {
        Some(c) => Err(format!("user_id contains {c:?}")),
        None => Ok(()),
    }
}

/// Sorted user ids joined by `:`.
pub fn conversation_id(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}:{b}")
    } else {
        format!("{b}:{a}")
    }
}

/// The two parties of a conversation id.
pub fn parties(conversation_id: &str) -> Option<(&str, &str)> {
    let (a, b) = conversation_id.split_once(':')?;
    (validate_user_id(a).is_ok() && validate_user_id(b).is_ok()).then_some((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn client_tags() {
        let m: ClientMessage = serde_json::from_value(json!({"type": "UPLOAD_META"})).unwrap();
        assert_eq!(m, ClientMessage::UploadMeta { upload_id: None });
        let m: ClientMessage =
            serde_json::from_value(json!({"type": "FETCH_AUDIO", "message_id": "m"})).unwrap();
        assert_eq!(
            m,
            ClientMessage::FetchAudio {
                message_id: "m".into()
            }
        );
        assert_eq!(
            serde_json::to_value(ClientMessage::Bye).unwrap(),
            json!({"type": "BYE"})
        );
    }

    #[test]
    fn server_tags() {
        let v = serde_json::to_value(ServerMessage::error(ErrorCode::UploadRejected, "TooShort"))
            .unwrap();
        assert_eq!(
            v,
            json!({"type": "ERROR", "code": "UPLOAD_REJECTED", "detail": "TooShort"})
        );
        let v = serde_json::to_value(ServerMessage::SendOk {
            message_id: "x".into(),
        })
        .unwrap();
        assert_eq!(v["type"], "SEND_OK");
        let v = serde_json::to_value(ServerMessage::Recommendation {
            upload_id: "u".into(),
            order: [2, 3, 0, 1, 4, 5],
            probs: [0.05, 0.1, 0.4, 0.25, 0.15, 0.05],
            modality: Modality::SpeechOnly,
        })
        .unwrap();
        assert_eq!(v["modality"], "speech-only");
        assert_eq!(v["order"], json!([2, 3, 0, 1, 4, 5]));
    }

    #[test]
    fn error_code_names_match_serde() {
        for code in [
            ErrorCode::UploadRejected,
            ErrorCode::DuplicateUser,
            ErrorCode::NoSession,
        ] {
            assert_eq!(serde_json::to_value(code).unwrap(), code.as_str());
        }
    }

    #[test]
    fn conversation_ids() {
        assert_eq!(conversation_id("bob", "alice"), "alice:bob");
        assert_eq!(conversation_id("alice", "bob"), "alice:bob");
        assert_eq!(parties("alice:bob"), Some(("alice", "bob")));
        assert_eq!(parties("alice"), None);
    }

    #[test]
    fn user_ids() {
        assert!(validate_user_id("alice").is_ok());
        assert!(validate_user_id("a.b_c-d@e").is_ok());
        assert!(validate_user_id("").is_err());
        assert!(validate_user_id("a:b").is_err());
        assert!(validate_user_id("a b").is_err());
        assert!(validate_user_id(&"x".repeat(65)).is_err());
    }
}
