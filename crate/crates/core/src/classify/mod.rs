pub mod speech;
pub mod text;
pub mod transcribe;

pub use speech::{
    classify_speech, classify_speech_heuristic, load_acoustic_model, AcousticModel, Activation,
    DenseLayer, HeuristicThresholds, ModelError,
};
pub use text::{classify_text, EmotionLexicon, LexiconError, Taxonomy, TaxonomyTarget};
pub use transcribe::{
    FailingTranscriber, FixedTranscriber, MockTranscriber, NoTranscriber, Transcriber,
    TranscriptionError,
};
