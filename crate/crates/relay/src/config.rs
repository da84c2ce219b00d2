//! Server configuration: a TOML file, overridden by `TEASER_*` environment
//! variables, overridden in turn by explicit key/value pairs (command-line
//! flags).
//!
//! ```toml
//! listen = "127.0.0.1:7878"
//! http_listen = "127.0.0.1:7879"
//! storage_dir = "teaser-data"
//! model_path = "model.emow"
//! upload_ttl_ms = 300000
//! max_duration_ms = 120000
//! classify_timeout_ms = 10000
//!
//! [fusion]
//! speech = 1.0
//! text = 2.0
//!
//! [transcription]
//! mode = "mock"            # none | mock | http
//! mock_path = "transcripts.json"
//! ```

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use teaser_core::catalog::Catalog;
use teaser_core::classify::speech::load_acoustic_model;
use teaser_core::classify::text::EmotionLexicon;
use teaser_core::classify::transcribe::{MockTranscriber, NoTranscriber, Transcriber};
use teaser_core::fusion::FusionWeights;
use teaser_core::mfcc::FrameSpec;
use teaser_core::pipeline::Pipeline;
use thiserror::Error;

use crate::hub::HubConfig;
use crate::transcribe::HttpTranscriber;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config at `{path}`: {message}")]
    BadConfig { path: String, message: String },
    #[error("{path}: {message}")]
    Asset { path: PathBuf, message: String },
}

impl ConfigError {
    fn bad(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::BadConfig {
            path: path.into(),
            message: message.into(),
        }
    }

    fn asset(path: &Path, message: impl ToString) -> Self {
        ConfigError::Asset {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptionMode {
    #[default]
    None,
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptionConfig {
    #[serde(default)]
    pub mode: TranscriptionMode,
    /// JSON object of clip digest -> transcript.
    #[serde(default)]
    pub mock_path: Option<PathBuf>,
    /// Endpoint accepting a WAV body and answering `{"transcript": ...}`.
    #[serde(default)]
    pub url: Option<String>,
}

fn default_listen() -> SocketAddr {
    "127.0.0.1:7878".parse().unwrap()
}

fn default_storage_dir() -> PathBuf {
    PathBuf::from("teaser-data")
}

fn default_upload_ttl_ms() -> u64 {
    300_000
}

fn default_max_duration_ms() -> u64 {
    teaser_core::audio::DEFAULT_MAX_DURATION_MS
}

fn default_classify_timeout_ms() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    /// Catalog, diagnostics and WebSocket endpoint; off when absent.
    #[serde(default)]
    pub http_listen: Option<SocketAddr>,
    #[serde(default = "default_storage_dir")]
    pub storage_dir: PathBuf,
    /// EMOW weights; the heuristic classifier is used when absent.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    #[serde(default)]
    pub catalog_path: Option<PathBuf>,
    #[serde(default = "default_upload_ttl_ms")]
    pub upload_ttl_ms: u64,
    #[serde(default = "default_max_duration_ms")]
    pub max_duration_ms: u64,
    #[serde(default = "default_classify_timeout_ms")]
    pub classify_timeout_ms: u64,
    #[serde(default)]
    pub fusion: FusionWeights,
    #[serde(default)]
    pub transcription: TranscriptionConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Str,
    Int,
    Float,
}

/// Overridable keys: dotted path, environment variable, value kind.
const KEYS: &[(&str, &str, Kind)] = &[
    ("listen", "TEASER_LISTEN", Kind::Str),
    ("http_listen", "TEASER_HTTP_LISTEN", Kind::Str),
    ("storage_dir", "TEASER_STORAGE_DIR", Kind::Str),
    ("model_path", "TEASER_MODEL_PATH", Kind::Str),
    ("lexicon_path", "TEASER_LEXICON_PATH", Kind::Str),
    ("catalog_path", "TEASER_CATALOG_PATH", Kind::Str),
    ("upload_ttl_ms", "TEASER_UPLOAD_TTL_MS", Kind::Int),
    ("max_duration_ms", "TEASER_MAX_DURATION_MS", Kind::Int),
    (
        "classify_timeout_ms",
        "TEASER_CLASSIFY_TIMEOUT_MS",
        Kind::Int,
    ),
    ("fusion.speech", "TEASER_FUSION_SPEECH", Kind::Float),
    ("fusion.text", "TEASER_FUSION_TEXT", Kind::Float),
    ("transcription.mode", "TEASER_TRANSCRIPTION_MODE", Kind::Str),
    (
        "transcription.mock_path",
        "TEASER_TRANSCRIPTION_MOCK_PATH",
        Kind::Str,
    ),
    ("transcription.url", "TEASER_TRANSCRIPTION_URL", Kind::Str),
];

/// Names of the environment variables that override config keys.
pub fn env_vars() -> impl Iterator<Item = (&'static str, &'static str)> {
    KEYS.iter().map(|(key, var, _)| (*key, *var))
}

fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let (_, _, kind) = KEYS
        .iter()
        .find(|(k, _, _)| *k == key)
        .ok_or_else(|| ConfigError::bad(key, "unknown key"))?;
    let value = match kind {
        Kind::Str => toml::Value::String(raw.to_string()),
        Kind::Int => raw
            .trim()
            .parse::<i64>()
            .map(toml::Value::Integer)
            .map_err(|e| ConfigError::bad(key, e.to_string()))?,
        Kind::Float => raw
            .trim()
            .parse::<f64>()
            .map(toml::Value::Float)
            .map_err(|e| ConfigError::bad(key, e.to_string()))?,
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("non-empty key");
    let mut node = table;
    for part in parts {
        node = node
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::bad(part, "expected a table"))?;
    }
    node.insert(leaf.to_string(), value);
    Ok(())
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::bad("<document>", e.message()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let value = toml::Value::Table(table);
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::bad(path, e.into_inner().to_string())
        })
    }

    /// Layers `file` (if any) < `env` < `overrides`. `env` yields
    /// `(variable, value)` pairs; only `TEASER_*` names listed in
    /// [`env_vars`] are read. `overrides` are `(dotted key, value)`.
    pub fn load<E, K, V>(
        file: Option<&Path>,
        env: E,
        overrides: &[(&str, String)],
    ) -> Result<Self, ConfigError>
    where
        E: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table = match file {
            Some(path) => fs::read_to_string(path)
                .map_err(|e| ConfigError::asset(path, e))?
                .parse::<toml::Table>()
                .map_err(|e| ConfigError::bad("<document>", e.message()))?,
            None => toml::Table::new(),
        };
        for (var, value) in env {
            if let Some((key, _, _)) = KEYS.iter().find(|(_, v, _)| *v == var.as_ref()) {
                set_key(&mut table, key, value.as_ref())?;
            }
        }
        for (key, value) in overrides {
            set_key(&mut table, key, value)?;
        }
        let config = Self::from_table(table)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.upload_ttl_ms == 0 {
            return Err(ConfigError::bad("upload_ttl_ms", "must be positive"));
        }
        if self.max_duration_ms == 0 {
            return Err(ConfigError::bad("max_duration_ms", "must be positive"));
        }
        if self.classify_timeout_ms == 0 {
            return Err(ConfigError::bad("classify_timeout_ms", "must be positive"));
        }
        match self.transcription.mode {
            TranscriptionMode::Mock if self.transcription.mock_path.is_none() => Err(
                ConfigError::bad("transcription.mock_path", "required for mode = \"mock\""),
            ),
            TranscriptionMode::Http if self.transcription.url.is_none() => Err(ConfigError::bad(
                "transcription.url",
                "required for mode = \"http\"",
            )),
            _ => Ok(()),
        }
    }

    pub fn hub_config(&self) -> HubConfig {
        HubConfig {
            upload_ttl: Duration::from_millis(self.upload_ttl_ms),
            max_duration_ms: self.max_duration_ms,
            classify_timeout: Duration::from_millis(self.classify_timeout_ms),
        }
    }

    /// Loads the model (if configured) and the lexicon into a pipeline.
    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        let model = match &self.model_path {
            Some(path) => {
                let bytes = fs::read(path).map_err(|e| ConfigError::asset(path, e))?;
                Some(load_acoustic_model(&bytes).map_err(|e| ConfigError::asset(path, e))?)
            }
            None => None,
        };
        if let Some(m) = &model {
            if m.input_dim() != teaser_core::mfcc::NUM_COEFFICIENTS {
                let path = self.model_path.as_deref().unwrap();
                return Err(ConfigError::asset(
                    path,
                    format!("model input width {} is not 40", m.input_dim()),
                ));
            }
        }
        let lexicon = match &self.lexicon_path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| ConfigError::asset(path, e))?;
                EmotionLexicon::from_json(&text).map_err(|e| ConfigError::asset(path, e))?
            }
            None => EmotionLexicon::bundled(),
        };
        Pipeline::new(FrameSpec::default(), model, lexicon, self.fusion)
            .map_err(|e| ConfigError::bad("<pipeline>", e.to_string()))
    }

    pub fn catalog(&self) -> Result<Catalog, ConfigError> {
        match &self.catalog_path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| ConfigError::asset(path, e))?;
                Catalog::load(&text).map_err(|e| ConfigError::asset(path, e))
            }
            None => Ok(Catalog::bundled()),
        }
    }

    pub fn transcriber(&self) -> Result<Arc<dyn Transcriber>, ConfigError> {
        let t = &self.transcription;
        Ok(match t.mode {
            TranscriptionMode::None => Arc::new(NoTranscriber),
            TranscriptionMode::Mock => {
                let path = t.mock_path.as_deref().expect("validated");
                let text = fs::read_to_string(path).map_err(|e| ConfigError::asset(path, e))?;
                Arc::new(
                    MockTranscriber::from_json(&text).map_err(|e| ConfigError::asset(path, e))?,
                )
            }
            TranscriptionMode::Http => {
                let url = t.url.as_deref().expect("validated");
                Arc::new(
                    HttpTranscriber::new(url, Duration::from_millis(self.classify_timeout_ms))
                        .map_err(|e| ConfigError::bad("transcription.url", e))?,
                )
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO_ENV: [(&str, &str); 0] = [];

    #[test]
    fn defaults() {
        let c = ServerConfig::default();
        assert_eq!(c.upload_ttl_ms, 300_000);
        assert_eq!(c.max_duration_ms, 120_000);
        assert_eq!(c.classify_timeout_ms, 10_000);
        assert_eq!(c.fusion, FusionWeights::default());
        assert_eq!(c.transcription.mode, TranscriptionMode::None);
        assert!(c.http_listen.is_none());
    }

    #[test]
    fn field_paths_in_errors() {
        let err = ServerConfig::from_toml("[fusion]\nspeech = \"loud\"\ntext = 1").unwrap_err();
        assert!(
            matches!(&err, ConfigError::BadConfig { path, .. } if path == "fusion.speech"),
            "{err}"
        );
        let err = ServerConfig::from_toml("listen = \"nowhere\"").unwrap_err();
        assert!(
            matches!(&err, ConfigError::BadConfig { path, .. } if path == "listen"),
            "{err}"
        );
        let err = ServerConfig::from_toml("upload_ttl = 5").unwrap_err();
        assert!(err.to_string().contains("upload_ttl"), "{err}");
        let err = ServerConfig::from_toml("[fusion]\nspeech = 0\ntext = 0").unwrap_err();
        assert!(
            matches!(&err, ConfigError::BadConfig { path, .. } if path == "fusion"),
            "{err}"
        );
        let err =
            ServerConfig::from_toml("[transcription]\nmode = \"carrier-pigeon\"").unwrap_err();
        assert!(
            matches!(&err, ConfigError::BadConfig { path, .. } if path == "transcription.mode"),
            "{err}"
        );
    }

    #[test]
    fn precedence_file_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("server.toml");
        fs::write(
            &file,
            "upload_ttl_ms = 1000\nmax_duration_ms = 5000\nlisten = \"127.0.0.1:1\"\n",
        )
        .unwrap();
        let env = [
            ("TEASER_UPLOAD_TTL_MS", "2000"),
            ("TEASER_LISTEN", "127.0.0.1:2"),
            ("UNRELATED", "x"),
        ];
        let c = ServerConfig::load(Some(&file), env, &[("listen", "127.0.0.1:3".into())]).unwrap();
        assert_eq!(c.max_duration_ms, 5000);
        assert_eq!(c.upload_ttl_ms, 2000);
        assert_eq!(c.listen, "127.0.0.1:3".parse().unwrap());
    }

    #[test]
    fn env_values_are_typed() {
        let err = ServerConfig::load(None, [("TEASER_FUSION_TEXT", "heavy")], &[]).unwrap_err();
        assert!(matches!(&err, ConfigError::BadConfig { path, .. } if path == "fusion.text"));
        let c = ServerConfig::load(None, [("TEASER_FUSION_TEXT", "3")], &[]).unwrap();
        assert_eq!(c.fusion.text(), 3.0);
        assert_eq!(c.fusion.speech(), 1.0);
    }

    #[test]
    fn mode_requirements() {
        let err =
            ServerConfig::load(None, [("TEASER_TRANSCRIPTION_MODE", "mock")], &[]).unwrap_err();
        assert!(
            matches!(&err, ConfigError::BadConfig { path, .. } if path == "transcription.mock_path")
        );
        let err = ServerConfig::load(None, NO_ENV, &[("upload_ttl_ms", "0".into())]).unwrap_err();
        assert!(matches!(&err, ConfigError::BadConfig { path, .. } if path == "upload_ttl_ms"));
    }

    #[test]
    fn missing_file_and_bad_assets() {
        let err =
            ServerConfig::load(Some(Path::new("/nonexistent/x.toml")), NO_ENV, &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Asset { .. }));
        let c = ServerConfig {
            model_path: Some("/nonexistent/model.emow".into()),
            ..ServerConfig::default()
        };
        assert!(matches!(c.pipeline(), Err(ConfigError::Asset { .. })));
    }
}
