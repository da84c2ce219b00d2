#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use teaser_core::audio::{encode_wav, AudioClip};
use teaser_core::catalog::Catalog;
use teaser_core::classify::speech::AcousticModel;
use teaser_core::classify::transcribe::{Transcriber, TranscriptionError};
use teaser_core::pipeline::Pipeline;
use teaser_relay::{Client, Hub, HubConfig, Server, ServerHandle, Store};

pub fn localhost() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

pub async fn start_with(
    dir: &Path,
    transcriber: Arc<dyn Transcriber>,
    model: Option<AcousticModel>,
    config: HubConfig,
    http: bool,
) -> ServerHandle {
    let hub = Hub::new(
        Arc::new(Pipeline::with_model(model)),
        transcriber,
        Arc::new(Catalog::bundled()),
        Store::open(dir).unwrap(),
        config,
    )
    .unwrap();
    Server::with_hub(Arc::new(hub), localhost(), http.then(localhost))
        .await
        .unwrap()
        .spawn()
}

pub async fn start(dir: &Path, transcriber: Arc<dyn Transcriber>) -> ServerHandle {
    start_with(
        dir,
        transcriber,
        Some(AcousticModel::zeros()),
        HubConfig::default(),
        false,
    )
    .await
}

/// A distinct 16 kHz tone per `seed`.
pub fn tone_clip(seed: usize, ms: usize) -> AudioClip {
    let n = 16 * ms;
    let freq = 180.0 + 7.0 * seed as f64;
    AudioClip::new(
        (0..n)
            .map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
            .collect(),
    )
    .unwrap()
}

pub fn tone(seed: usize, ms: usize) -> Vec<u8> {
    encode_wav(&tone_clip(seed, ms))
}

pub async fn connect(addr: SocketAddr, user: &str) -> Client {
    let mut c = Client::connect(addr).await.unwrap();
    c.hello(user).await.unwrap();
    c
}

/// Two connected, paired clients.
pub async fn pair(addr: SocketAddr, a: &str, b: &str) -> (Client, Client) {
    let mut ca = connect(addr, a).await;
    let mut cb = connect(addr, b).await;
    ca.pair(b).await.unwrap();
    cb.next_paired().await.unwrap();
    (ca, cb)
}

/// Sleeps before answering; used to hold up one upload.
pub struct SlowTranscriber {
    pub delay: Duration,
    pub transcript: String,
}

impl Transcriber for SlowTranscriber {
    fn transcribe(&self, _clip: &AudioClip) -> Result<String, TranscriptionError> {
        std::thread::sleep(self.delay);
        Ok(self.transcript.clone())
    }
}
