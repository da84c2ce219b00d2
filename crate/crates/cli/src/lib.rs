//! The `teaser` command: run the relay, classify a clip offline, evaluate
//! the classifiers on labeled fixtures, and inspect catalogs and logs.
//!
//! Machine-readable output is JSON on stdout; tables and diagnostics go to
//! stderr. Exit codes: 0 success, 2 usage, 3 validation, 4 runtime.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use teaser_core::audio::parse_wav;
use teaser_core::catalog::{Catalog, CatalogError, TeaserMode};
use teaser_core::classify::transcribe::{FixedTranscriber, Transcriber};
use teaser_core::emotion::{Emotion, EmotionDistribution, NUM_EMOTIONS};
use teaser_core::eval::{evaluate, load_fixture_dir, EvalError, EvalReport, ModalityReport};
use teaser_core::exec::Execution;
use teaser_relay::config::ConfigError;
use teaser_relay::{Server, ServerConfig, ServerError, Store, StoreError};
use tokio_util::sync::CancellationToken;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

/// A command failure and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn validation(message: impl ToString) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::validation(e)
    }
}

impl From<ServerError> for Failure {
    fn from(e: ServerError) -> Self {
        match e {
            ServerError::Config(e) => e.into(),
            other => Failure::runtime(other),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } | EvalError::Pipeline { .. } => Failure::runtime(e),
            _ => Failure::validation(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "teaser",
    version,
    about = "Emotional teasers for voice messages"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the relay server until interrupted.
    Serve(ConfigArgs),
    /// Classify one WAV file and print the full analysis.
    Classify(ClassifyArgs),
    /// Evaluate speech, text and fused accuracy on a fixture directory.
    Eval(EvalArgs),
    /// List or validate a teaser catalog.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Print a conversation log, or list conversations.
    Replay(ReplayArgs),
}

/// Server settings. Each flag overrides the config file and `TEASER_*`
/// environment variables.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
    /// Also serve HTTP (catalog, diagnostics, WebSocket) on this address.
    #[arg(long)]
    pub http_listen: Option<String>,
    #[arg(long)]
    pub storage_dir: Option<PathBuf>,
    /// EMOW acoustic model; without one the prosody heuristic is used.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub upload_ttl_ms: Option<u64>,
    #[arg(long)]
    pub max_duration_ms: Option<u64>,
    #[arg(long)]
    pub classify_timeout_ms: Option<u64>,
    #[arg(long)]
    pub fusion_speech: Option<f64>,
    #[arg(long)]
    pub fusion_text: Option<f64>,
    /// none, mock or http.
    #[arg(long)]
    pub transcription_mode: Option<String>,
    /// JSON object of clip digest to transcript, for mock mode.
    #[arg(long)]
    pub transcription_mock_path: Option<PathBuf>,
    #[arg(long)]
    pub transcription_url: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let num = |n: Option<u64>| n.map(|n| n.to_string());
        let float = |x: Option<f64>| x.map(|x| x.to_string());
        [
            ("listen", self.listen.clone()),
            ("http_listen", self.http_listen.clone()),
            ("storage_dir", path(&self.storage_dir)),
            ("model_path", path(&self.model)),
            ("lexicon_path", path(&self.lexicon)),
            ("catalog_path", path(&self.catalog)),
            ("upload_ttl_ms", num(self.upload_ttl_ms)),
            ("max_duration_ms", num(self.max_duration_ms)),
            ("classify_timeout_ms", num(self.classify_timeout_ms)),
            ("fusion.speech", float(self.fusion_speech)),
            ("fusion.text", float(self.fusion_text)),
            ("transcription.mode", self.transcription_mode.clone()),
            (
                "transcription.mock_path",
                path(&self.transcription_mock_path),
            ),
            ("transcription.url", self.transcription_url.clone()),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// File, then environment, then flags.
    pub fn load(&self) -> Result<ServerConfig, ConfigError> {
        ServerConfig::load(self.config.as_deref(), std::env::vars(), &self.overrides())
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub wav: PathBuf,
    /// Use this transcript instead of the configured transcription.
    #[arg(long)]
    pub transcript: Option<String>,
    /// Extract features on one thread.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<name>.wav`, `<name>.txt`, `<name>.label`.
    pub dir: PathBuf,
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// Print every id grouped by emotion and mode.
    List {
        /// Catalog document; the bundled one when omitted.
        path: Option<PathBuf>,
    },
    /// Check every catalog invariant.
    Validate { path: Option<PathBuf> },
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Conversation id, e.g. `alice:bob`. Lists conversations when omitted.
    pub conversation: Option<String>,
    #[arg(long)]
    pub storage_dir: Option<PathBuf>,
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

/// Parses `args` and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let default_level = match cli.command {
        Command::Serve(_) => "info",
        _ => "warn",
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .try_init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Serve(args) => serve(&args),
        Command::Classify(args) => classify(&args),
        Command::Eval(args) => eval(&args),
        Command::Catalog(CatalogCommand::List { path }) => catalog_list(path.as_deref()),
        Command::Catalog(CatalogCommand::Validate { path }) => catalog_validate(path.as_deref()),
        Command::Replay(args) => replay(&args),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(Failure::runtime)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(Failure::runtime)
}

fn serve(args: &ConfigArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    runtime.block_on(async {
        let server = Server::bind(&config).await?;
        let token = CancellationToken::new();
        let ready = serde_json::json!({
            "listen": server.local_addr().to_string(),
            "http_listen": server.http_addr().map(|a| a.to_string()),
            "storage_dir": config.storage_dir,
        });
        println!("{ready}");
        let _ = std::io::stdout().flush();

        let stop = token.clone();
        tokio::spawn(async move {
            shutdown_signal().await;
            tracing::info!("shutting down");
            stop.cancel();
        });
        server.run(token).await?;
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn classify(args: &ClassifyArgs) -> Result<(), Failure> {
    let config = args.config.load()?;
    let pipeline = config
        .pipeline()?
        .with_execution(execution(args.sequential));
    let transcriber: Arc<dyn Transcriber> = match &args.transcript {
        Some(t) => Arc::new(FixedTranscriber(t.clone())),
        None => config.transcriber()?,
    };
    let bytes = std::fs::read(&args.wav)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.wav.display())))?;
    let clip = parse_wav(&bytes)
        .map_err(|e| Failure::validation(format!("{}: {}: {e}", args.wav.display(), e.code())))?;
    clip.check_duration(config.max_duration_ms)
        .map_err(|e| Failure::validation(format!("{}: {}: {e}", args.wav.display(), e.code())))?;
    let analysis = pipeline
        .analyze(&clip, transcriber.as_ref())
        .map_err(Failure::runtime)?;
    let report = analysis.report(&clip);
    eprint!("{}", classify_table(&report));
    print_json(&report)
}

fn dist_row(label: &str, d: &EmotionDistribution) -> String {
    let mut row = format!("{label:<4}");
    for p in d.probs() {
        let _ = write!(row, " {p:>9.4}");
    }
    row.push('\n');
    row
}

fn classify_table(r: &teaser_core::pipeline::AnalysisReport) -> String {
    let mut s = format!(
        "{} ms, {} frames, c0..c3 = {:.3} {:.3} {:.3} {:.3}\n",
        r.duration_ms, r.frame_count, r.mfcc[0], r.mfcc[1], r.mfcc[2], r.mfcc[3]
    );
    s.push_str("    ");
    for name in Emotion::names() {
        let _ = write!(s, " {name:>9}");
    }
    s.push('\n');
    s.push_str(&dist_row("p_s", &r.p_s));
    if let Some(p_t) = &r.p_t {
        s.push_str(&dist_row("p_t", p_t));
    }
    s.push_str(&dist_row("p_f", &r.p_f));
    let _ = writeln!(
        s,
        "transcript: {}",
        r.transcript.as_deref().unwrap_or("(unavailable)")
    );
    let _ = writeln!(s, "{}: {}", r.modality.as_str(), r.order.join(" > "));
    s
}

fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let config = args.config.load()?;
    let pipeline = config.pipeline()?;
    let samples = load_fixture_dir(&args.dir)?;
    let report = evaluate(&pipeline, &samples, execution(args.sequential))?;
    eprint!("{}", eval_table(&report));
    print_json(&report)
}

fn short(name: &str) -> &str {
    &name[..3]
}

/// Accuracy per modality, then the fused confusion matrix and per-class
/// precision and recall.
pub fn eval_table(r: &EvalReport) -> String {
    let mut s = String::from("modality  evaluated  correct  accuracy\n");
    for (name, m) in [
        ("speech", &r.speech),
        ("text", &r.text),
        ("fused", &r.fused),
    ] {
        let _ = writeln!(
            s,
            "{name:<8}  {:>9}  {:>7}  {:>8.4}",
            m.evaluated, m.correct, m.accuracy
        );
    }
    s.push_str("\nfused confusion (rows gold, columns predicted)\n");
    s.push_str(&confusion_table(&r.fused));
    s
}

fn confusion_table(m: &ModalityReport) -> String {
    let names = Emotion::names();
    let mut s = format!("{:<10}", "");
    for n in names {
        let _ = write!(s, " {:>4}", short(n));
    }
    s.push_str("  precision  recall\n");
    for (g, name) in names.iter().enumerate() {
        let _ = write!(s, "{name:<10}");
        for p in 0..NUM_EMOTIONS {
            let _ = write!(s, " {:>4}", m.confusion[g][p]);
        }
        let _ = writeln!(s, "  {:>9.4}  {:>6.4}", m.precision[g], m.recall[g]);
    }
    s
}

fn load_catalog(path: Option<&Path>) -> Result<Catalog, Failure> {
    match path {
        None => Ok(Catalog::bundled()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::runtime(format!("{}: {e}", p.display())))?;
            Catalog::load(&text).map_err(|e| catalog_failure(p, &e))
        }
    }
}

fn catalog_failure(path: &Path, e: &CatalogError) -> Failure {
    Failure::validation(format!("{}: {}: {e}", path.display(), e.code()))
}

#[derive(Serialize)]
struct CatalogGroup<'a> {
    emotion: &'static str,
    mode: &'static str,
    ids: Vec<&'a str>,
}

fn catalog_list(path: Option<&Path>) -> Result<(), Failure> {
    let catalog = load_catalog(path)?;
    let mut groups = Vec::new();
    for emotion in Emotion::ALL {
        for mode in [TeaserMode::Animated, TeaserMode::Color] {
            groups.push(CatalogGroup {
                emotion: emotion.name(),
                mode: mode.as_str(),
                ids: catalog
                    .list_by_emotion(emotion, mode)
                    .iter()
                    .map(|t| t.id.as_str())
                    .collect(),
            });
        }
    }
    for g in &groups {
        eprintln!("{:<10} {:<9} {}", g.emotion, g.mode, g.ids.join(" "));
    }
    print_json(&serde_json::json!({
        "version": catalog.version(),
        "entries": catalog.len(),
        "groups": groups,
    }))
}

fn catalog_validate(path: Option<&Path>) -> Result<(), Failure> {
    let catalog = load_catalog(path)?;
    let animated = catalog.count(TeaserMode::Animated);
    let color = catalog.count(TeaserMode::Color);
    eprintln!(
        "{} entries ({animated} animated, {color} color)",
        catalog.len()
    );
    print_json(&serde_json::json!({
        "valid": true,
        "version": catalog.version(),
        "entries": catalog.len(),
        "animated": animated,
        "color": color,
    }))
}

fn replay(args: &ReplayArgs) -> Result<(), Failure> {
    let dir = match &args.storage_dir {
        Some(d) => d.clone(),
        None => {
            let base = ConfigArgs {
                config: args.config.clone(),
                ..ConfigArgs::default()
            };
            base.load()?.storage_dir
        }
    };
    if !dir.join("logs").is_dir() {
        return Err(Failure::runtime(format!(
            "{}: not a storage directory",
            dir.display()
        )));
    }
    let store = Store::open(&dir).map_err(Failure::runtime)?;
    match &args.conversation {
        None => {
            let list = store.conversations().map_err(Failure::runtime)?;
            print_json(&list)
        }
        Some(conv) => {
            let lines = store.replay_raw(conv).map_err(|e| match e {
                StoreError::UnknownConversation(_) => Failure::validation(e),
                other => Failure::runtime(other),
            })?;
            // the log lines are already JSON; emit them verbatim
            let mut out = std::io::stdout().lock();
            for line in &lines {
                writeln!(out, "{line}").map_err(Failure::runtime)?;
            }
            eprintln!("{} messages in {conv}", lines.len());
            out.flush().map_err(Failure::runtime)
        }
    }
}
