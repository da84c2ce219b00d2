//! On-disk persistence: content-addressed audio blobs and one append-only
//! JSON-lines log per conversation.
//!
//! ```text
//! <root>/blobs/<sha256>.wav
//! <root>/logs/<user_a>+<user_b>.jsonl
//! ```

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use teaser_core::audio::{encode_wav, AudioClip};
use thiserror::Error;

use crate::protocol::{parties, MessageEnvelope};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown conversation {0}")]
    UnknownConversation(String),
    #[error("unknown blob {0}")]
    UnknownBlob(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// Where a logged message lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    pub conversation_id: String,
    pub audio_digest: String,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_digest(s: &str) -> bool {
    s.len() == 64
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [root.join("blobs"), root.join("logs")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn blob_path(&self, digest: &str) -> PathBuf {
        self.root.join("blobs").join(format!("{digest}.wav"))
    }

    fn log_path(&self, conversation_id: &str) -> PathBuf {
        self.root
            .join("logs")
            .join(format!("{}.jsonl", conversation_id.replace(':', "+")))
    }

    /// Writes the canonical WAV of `clip` under its digest; a blob that is
    /// already present is left alone.
    pub fn put_blob(&self, clip: &AudioClip) -> Result<String, StoreError> {
        let digest = clip.digest();
        let path = self.blob_path(&digest);
        if path.exists() {
            return Ok(digest);
        }
        let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
        let write = || -> io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&encode_wav(clip))?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(io_err(&path))?;
        Ok(digest)
    }

    pub fn read_blob(&self, digest: &str) -> Result<Vec<u8>, StoreError> {
        if !is_digest(digest) {
            return Err(StoreError::UnknownBlob(digest.to_string()));
        }
        let path = self.blob_path(digest);
        fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::UnknownBlob(digest.to_string()),
            _ => io_err(&path)(e),
        })
    }

    /// Creates an empty log if none exists.
    pub fn ensure_log(&self, conversation_id: &str) -> Result<(), StoreError> {
        let path = self.log_path(conversation_id);
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map(drop)
            .map_err(io_err(&path))
    }

    /// Appends one line and syncs it to disk before returning.
    pub fn append(&self, envelope: &MessageEnvelope) -> Result<(), StoreError> {
        let path = self.log_path(&envelope.conversation_id);
        let mut line = envelope.to_json_line();
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        f.write_all(line.as_bytes()).map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))
    }

    /// Raw log lines in append order.
    pub fn replay_raw(&self, conversation_id: &str) -> Result<Vec<String>, StoreError> {
        let path = self.log_path(conversation_id);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text.lines().map(str::to_string).collect()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::UnknownConversation(conversation_id.to_string()))
            }
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Every envelope of a conversation in append order.
    pub fn replay_log(&self, conversation_id: &str) -> Result<Vec<MessageEnvelope>, StoreError> {
        let path = self.log_path(conversation_id);
        self.replay_raw(conversation_id)?
            .iter()
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|source| StoreError::Corrupt {
                    path: path.clone(),
                    line: i + 1,
                    source,
                })
            })
            .collect()
    }

    /// Conversation ids with a log on disk, sorted.
    pub fn conversations(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("logs");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    let id = stem.replace('+', ":");
                    if parties(&id).is_some() {
                        out.push(id);
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// message id -> record, rebuilt from every log.
    pub fn index(&self) -> Result<HashMap<String, MessageRecord>, StoreError> {
        let mut index = HashMap::new();
        for conversation in self.conversations()? {
            for env in self.replay_log(&conversation)? {
                index.insert(
                    env.message_id,
                    MessageRecord {
                        conversation_id: env.conversation_id,
                        audio_digest: env.audio_digest,
                    },
                );
            }
        }
        Ok(index)
    }

    /// Last `sent_at` per conversation, so timestamps stay monotone across
    /// restarts.
    pub fn last_sent_at(&self) -> Result<HashMap<String, u64>, StoreError> {
        let mut out = HashMap::new();
        for conversation in self.conversations()? {
            if let Some(last) = self.replay_log(&conversation)?.last() {
                out.insert(conversation, last.sent_at);
            }
        }
        Ok(out)
    }
}
