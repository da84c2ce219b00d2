//! Speech-to-text over HTTP: POST the canonical WAV, read back
//! `{"transcript": "..."}`.

use std::time::Duration;

use serde::Deserialize;
use teaser_core::audio::{encode_wav, AudioClip};
use teaser_core::classify::transcribe::{Transcriber, TranscriptionError};

#[derive(Debug, Clone)]
pub struct HttpTranscriber {
    url: reqwest::Url,
    client: reqwest::Client,
}

#[derive(Deserialize)]
struct Reply {
    transcript: String,
}

impl HttpTranscriber {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, String> {
        let url = reqwest::Url::parse(url).map_err(|e| e.to_string())?;
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { url, client })
    }

    async fn request(&self, wav: Vec<u8>) -> Result<String, TranscriptionError> {
        let unavailable = |e: reqwest::Error| TranscriptionError::Unavailable(e.to_string());
        let reply: Reply = self
            .client
            .post(self.url.clone())
            .header(reqwest::header::CONTENT_TYPE, "audio/wav")
            .body(wav)
            .send()
            .await
            .map_err(unavailable)?
            .error_for_status()
            .map_err(unavailable)?
            .json()
            .await
            .map_err(unavailable)?;
        Ok(reply.transcript)
    }
}

impl Transcriber for HttpTranscriber {
    /// Blocks; call from a blocking thread when inside a runtime.
    fn transcribe(&self, clip: &AudioClip) -> Result<String, TranscriptionError> {
        let wav = encode_wav(clip);
        match tokio::runtime::Handle::try_current() {
            Ok(handle) => handle.block_on(self.request(wav)),
            Err(_) => tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| TranscriptionError::Unavailable(e.to_string()))?
                .block_on(self.request(wav)),
        }
    }
}
