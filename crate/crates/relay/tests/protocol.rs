mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use bytes::Bytes;
use common::*;
use teaser_core::audio::{encode_pcm16_wav, encode_wav, parse_wav, AudioClip};
use teaser_core::catalog::Catalog;
use teaser_core::classify::speech::AcousticModel;
use teaser_core::classify::transcribe::{FailingTranscriber, MockTranscriber, NoTranscriber};
use teaser_core::emotion::EmotionDistribution;
use teaser_core::fusion::{recommend, Modality};
use teaser_core::pipeline::Pipeline;
use teaser_relay::{Client, ClientMessage, ErrorCode, Frame, HubConfig, ServerMessage};

#[tokio::test]
async fn hello_examples() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;

    let mut alice = Client::connect(server.addr).await.unwrap();
    let (version, emotions) = alice.hello("alice").await.unwrap();
    assert_eq!(version, Catalog::bundled().version());
    assert_eq!(
        emotions,
        [
            "happiness",
            "sadness",
            "surprise",
            "calmness",
            "fear",
            "anger"
        ]
    );

    let mut again = Client::connect(server.addr).await.unwrap();
    let err = again.hello("alice").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::DuplicateUser));

    let mut nobody = Client::connect(server.addr).await.unwrap();
    let err = nobody.hello("").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::MalformedFrame));
    let err = nobody.pair("alice").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::NoSession));

    // a second HELLO on the same connection is refused
    let err = alice.hello("alice2").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::MalformedFrame));

    // the id frees up once the first session says BYE
    alice.bye().await.unwrap();
    again.hello("alice").await.unwrap();
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn pair_examples() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    let mut alice = connect(server.addr, "alice").await;
    let mut bob = connect(server.addr, "bob").await;
    let mut carol = connect(server.addr, "carol").await;

    let err = alice.pair("dave").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::PeerUnavailable));
    let err = alice.pair("alice").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::PeerUnavailable));

    assert_eq!(bob.pair("alice").await.unwrap(), "alice:bob");
    assert_eq!(alice.next_paired().await.unwrap(), "alice:bob");

    let err = alice.pair("carol").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::AlreadyPaired));
    let err = carol.pair("bob").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::AlreadyPaired));

    assert!(server.hub.replay_log("alice:bob").unwrap().is_empty());
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn upload_with_mock_transcript_recommends_happiness() {
    let dir = tempfile::tempdir().unwrap();
    let clip = tone_clip(1, 1000);
    let mock = MockTranscriber::new().with(&clip, "I am so happy");
    let server = start(dir.path(), Arc::new(mock)).await;
    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;

    let rec = alice.upload(encode_wav(&clip), Some("u1")).await.unwrap();
    assert_eq!(rec.upload_id, "u1");
    assert_eq!(rec.modality, Modality::Fused);
    assert_eq!(rec.order, [0, 1, 2, 3, 4, 5]);
    // uniform p_s, p_t = (w+1)/(sum) = [2/7, 1/7 x5], weights 1:2
    let top = 1.0 / 18.0 + 2.0 / 3.0 * 2.0 / 7.0;
    let rest = 1.0 / 18.0 + 2.0 / 3.0 * 1.0 / 7.0;
    assert!((rec.probs[0] - top).abs() < 1e-12);
    assert!(rec.probs[1..].iter().all(|p| (p - rest).abs() < 1e-12));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn transcription_fault_falls_back_to_speech() {
    let dir = tempfile::tempdir().unwrap();
    let server = start_with(
        dir.path(),
        Arc::new(FailingTranscriber::default()),
        None,
        HubConfig::default(),
        false,
    )
    .await;
    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;
    let clip = tone_clip(3, 800);
    let rec = alice.upload(encode_wav(&clip), None).await.unwrap();
    assert_eq!(rec.modality, Modality::SpeechOnly);
    let (_, p_s, _) = Pipeline::with_model(None).speech(&clip).unwrap();
    assert_eq!(rec.order, recommend(&p_s).order_indices());
    assert_eq!(&rec.probs, p_s.probs());
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn slow_transcription_times_out_to_speech_only() {
    let dir = tempfile::tempdir().unwrap();
    let slow = SlowTranscriber {
        delay: Duration::from_millis(1500),
        transcript: "so happy".into(),
    };
    let config = HubConfig {
        classify_timeout: Duration::from_millis(100),
        ..HubConfig::default()
    };
    let server = start_with(dir.path(), Arc::new(slow), None, config, false).await;
    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;
    let started = Instant::now();
    let rec = alice.upload(tone(4, 500), None).await.unwrap();
    assert!(started.elapsed() < Duration::from_millis(1200));
    assert_eq!(rec.modality, Modality::SpeechOnly);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn upload_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let config = HubConfig {
        max_duration_ms: 1000,
        ..HubConfig::default()
    };
    let server = start_with(dir.path(), Arc::new(NoTranscriber), None, config, false).await;

    let mut loner = connect(server.addr, "loner").await;
    let err = loner.upload(tone(0, 500), None).await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::NotPaired));

    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;
    let short = encode_pcm16_wav(&[0; 100], 16_000, 1);
    let err = alice.upload(short, None).await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UploadRejected));
    assert!(err.to_string().contains("TooShort"), "{err}");

    let err = alice.upload(tone(0, 1500), None).await.unwrap_err();
    assert!(err.to_string().contains("TooLong"), "{err}");

    let err = alice
        .upload(Bytes::from_static(b"not a wav"), None)
        .await
        .unwrap_err();
    assert!(err.to_string().contains("MalformedContainer"), "{err}");

    let mut wav = encode_pcm16_wav(&[0; 800], 16_000, 1);
    wav[20] = 3; // IEEE float format tag
    let err = alice.upload(wav, None).await.unwrap_err();
    assert!(err.to_string().contains("UnsupportedEncoding"), "{err}");

    let err = alice
        .upload(encode_pcm16_wav(&[0; 800], 11_025, 1), None)
        .await
        .unwrap_err();
    assert!(err.to_string().contains("UnsupportedRate"), "{err}");

    // the session is still usable
    alice.upload(tone(0, 500), None).await.unwrap();
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn send_deliver_and_fetch() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    let (mut alice, mut bob) = pair(server.addr, "alice", "bob").await;
    let mut carol = connect(server.addr, "carol").await;

    let clip = tone_clip(9, 700);
    let rec = alice.upload(encode_wav(&clip), None).await.unwrap();

    let err = alice
        .send_teaser(&rec.upload_id, "animated/anger/9")
        .await
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UnknownTeaser));
    let err = alice
        .send_teaser("nope", "animated/anger/1")
        .await
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UnknownUpload));
    let err = bob
        .send_teaser(&rec.upload_id, "animated/anger/1")
        .await
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UnknownUpload));

    let message_id = alice
        .send_teaser(&rec.upload_id, "animated/happiness/2")
        .await
        .unwrap();
    let env = bob.next_deliver().await.unwrap();
    assert_eq!(env.message_id, message_id);
    assert_eq!(env.conversation_id, "alice:bob");
    assert_eq!(env.sender, "alice");
    assert_eq!(env.teaser_id, "animated/happiness/2");
    assert_eq!(env.audio_digest, clip.digest());
    assert_eq!(env.duration_ms, 700);
    assert_eq!(env.modality, Modality::SpeechOnly);

    // an upload is consumed by SEND
    let err = alice
        .send_teaser(&rec.upload_id, "animated/happiness/2")
        .await
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UnknownUpload));

    for who in [&mut bob, &mut alice] {
        let (digest, wav) = who.fetch_audio(&message_id).await.unwrap();
        assert_eq!(digest, env.audio_digest);
        assert_eq!(parse_wav(&wav).unwrap().digest(), env.audio_digest);
    }
    let err = carol.fetch_audio(&message_id).await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::Forbidden));
    let err = bob.fetch_audio("no-such-message").await.unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UnknownMessage));

    let log = server.hub.replay_log("alice:bob").unwrap();
    assert_eq!(log, [env]);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn uploads_expire() {
    let dir = tempfile::tempdir().unwrap();
    let config = HubConfig {
        upload_ttl: Duration::from_millis(150),
        ..HubConfig::default()
    };
    let server = start_with(dir.path(), Arc::new(NoTranscriber), None, config, false).await;
    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;
    let rec = alice.upload(tone(0, 500), None).await.unwrap();
    tokio::time::sleep(Duration::from_millis(250)).await;
    let err = alice
        .send_teaser(&rec.upload_id, "color/fear/1")
        .await
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UploadExpired));
    let err = alice
        .send_teaser(&rec.upload_id, "color/fear/1")
        .await
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::UnknownUpload));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn offline_peer_gets_queue_exactly_once() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    let (mut alice, bob) = pair(server.addr, "alice", "bob").await;
    bob.bye().await.unwrap();

    let mut sent = Vec::new();
    for i in 0..3 {
        let rec = alice.upload(tone(i, 400), None).await.unwrap();
        sent.push(
            alice
                .send_teaser(&rec.upload_id, "animated/sadness/1")
                .await
                .unwrap(),
        );
    }
    assert_eq!(server.hub.queued_for("bob"), 3);

    let mut bob = Client::connect(server.addr).await.unwrap();
    bob.send_message(&ClientMessage::Hello {
        user_id: "bob".into(),
    })
    .await
    .unwrap();
    let mut got = Vec::new();
    // HELLO_OK, PAIRED, then the queue, in order
    for expected in 0..5 {
        let Frame::Json(b) = bob.recv_frame().await.unwrap() else {
            panic!()
        };
        let m: ServerMessage = serde_json::from_slice(&b).unwrap();
        match (expected, m) {
            (0, ServerMessage::HelloOk { .. }) => {}
            (
                1,
                ServerMessage::Paired {
                    conversation_id, ..
                },
            ) => assert_eq!(conversation_id, "alice:bob"),
            (_, ServerMessage::Deliver { envelope }) => got.push(envelope.message_id),
            (i, other) => panic!("frame {i}: {other:?}"),
        }
    }
    assert_eq!(got, sent);
    assert_eq!(server.hub.queued_for("bob"), 0);

    // nothing is delivered twice
    bob.bye().await.unwrap();
    let mut bob = Client::connect(server.addr).await.unwrap();
    bob.hello("bob").await.unwrap();
    bob.next_paired().await.unwrap();
    bob.set_timeout(Duration::from_millis(200));
    assert!(bob.next_deliver().await.is_err());
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn restart_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    let (mut alice, mut bob) = pair(server.addr, "alice", "bob").await;
    let mut delivered = Vec::new();
    for i in 0..3 {
        let rec = alice.upload(tone(i, 400), None).await.unwrap();
        alice
            .send_teaser(&rec.upload_id, "color/calmness/3")
            .await
            .unwrap();
        delivered.push(bob.next_deliver().await.unwrap());
    }
    drop((alice, bob));
    server.shutdown().await.unwrap();

    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    assert_eq!(server.hub.replay_log("alice:bob").unwrap(), delivered);
    let raw = server.hub.store().replay_raw("alice:bob").unwrap();
    let expected: Vec<String> = delivered.iter().map(|e| e.to_json_line()).collect();
    assert_eq!(raw, expected);
    assert!(matches!(
        server.hub.replay_log("alice:zed"),
        Err(teaser_relay::StoreError::UnknownConversation(_))
    ));

    // the message index survives too
    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;
    let (digest, _) = alice.fetch_audio(&delivered[1].message_id).await.unwrap();
    assert_eq!(digest, delivered[1].audio_digest);

    // and timestamps keep increasing
    let rec = alice.upload(tone(7, 400), None).await.unwrap();
    alice
        .send_teaser(&rec.upload_id, "color/calmness/3")
        .await
        .unwrap();
    let log = server.hub.replay_log("alice:bob").unwrap();
    assert!(log.windows(2).all(|w| w[0].sent_at <= w[1].sent_at));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn slow_upload_does_not_block_other_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let slow_clip = tone_clip(1, 500);
    let fast_clip = tone_clip(2, 500);

    struct Selective {
        slow: String,
    }
    impl teaser_core::classify::transcribe::Transcriber for Selective {
        fn transcribe(
            &self,
            clip: &AudioClip,
        ) -> Result<String, teaser_core::classify::transcribe::TranscriptionError> {
            if clip.digest() == self.slow {
                std::thread::sleep(Duration::from_millis(800));
            }
            Ok(String::new())
        }
    }
    let server = start(
        dir.path(),
        Arc::new(Selective {
            slow: slow_clip.digest(),
        }),
    )
    .await;
    let (alice, bob) = pair(server.addr, "alice", "bob").await;

    let slow = tokio::spawn(async move {
        let mut alice = alice;
        alice.upload(encode_wav(&slow_clip), None).await.unwrap();
        Instant::now()
    });
    tokio::time::sleep(Duration::from_millis(50)).await;
    let fast = tokio::spawn(async move {
        let mut bob = bob;
        bob.upload(encode_wav(&fast_clip), None).await.unwrap();
        Instant::now()
    });
    let (slow_done, fast_done) = (slow.await.unwrap(), fast.await.unwrap());
    assert!(fast_done < slow_done);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn malformed_frames() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    let mut c = Client::connect(server.addr).await.unwrap();

    let next_error = |m: ServerMessage| match m {
        ServerMessage::Error { code, .. } => code,
        other => panic!("{other:?}"),
    };
    async fn recv(c: &mut Client) -> ServerMessage {
        let Frame::Json(b) = c.recv_frame().await.unwrap() else {
            panic!()
        };
        serde_json::from_slice(&b).unwrap()
    }

    c.send_frame(Frame::Json(Bytes::from_static(b"{nope")))
        .await
        .unwrap();
    assert_eq!(next_error(recv(&mut c).await), ErrorCode::MalformedFrame);
    c.send_frame(Frame::Json(Bytes::from_static(br#"{"type":"DANCE"}"#)))
        .await
        .unwrap();
    assert_eq!(next_error(recv(&mut c).await), ErrorCode::MalformedFrame);
    c.send_frame(Frame::Binary(Bytes::from_static(b"abc")))
        .await
        .unwrap();
    assert_eq!(next_error(recv(&mut c).await), ErrorCode::MalformedFrame);

    // still alive
    c.hello("alice").await.unwrap();

    // an unknown frame kind loses framing: error, then close
    let mut raw = tokio::net::TcpStream::connect(server.addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    raw.write_all(&[0, 0, 0, 2, 9, 0]).await.unwrap();
    let mut buf = Vec::new();
    raw.read_to_end(&mut buf).await.unwrap();
    let frame = Frame::from_bytes(&buf).unwrap();
    let m: ServerMessage = serde_json::from_slice(frame.payload()).unwrap();
    assert_eq!(next_error(m), ErrorCode::MalformedFrame);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn uniform_speech_model_ignores_audio() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), Arc::new(NoTranscriber)).await;
    let (mut alice, _bob) = pair(server.addr, "alice", "bob").await;
    let rec = alice.upload(tone(5, 300), None).await.unwrap();
    assert_eq!(rec.modality, Modality::SpeechOnly);
    assert_eq!(&rec.probs, EmotionDistribution::uniform().probs());
    assert_eq!(
        server
            .hub
            .pending_upload("alice", &rec.upload_id)
            .unwrap()
            .recommendation,
        recommend(&EmotionDistribution::uniform())
    );
    let _ = AcousticModel::zeros();
    server.shutdown().await.unwrap();
}
