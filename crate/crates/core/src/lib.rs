//! Emotion classification, fusion and teaser catalog for voice messages.
//!
//! The acoustic path parses WAV input ([`audio`]), summarizes it as 40 MFCCs
//! ([`mfcc`]) and classifies it ([`classify::speech`]); the text path
//! classifies a transcript against a lexicon ([`classify::text`]). The two
//! distributions are fused and ordered for the sender ([`fusion`]), who then
//! picks a teaser from the [`catalog`].

pub mod audio;
pub mod catalog;
pub mod classify;
pub mod emotion;
pub mod eval;
pub mod exec;
pub mod fusion;
pub mod mfcc;
pub mod pipeline;

pub use audio::{parse_wav, AudioClip, AudioError};
pub use catalog::{Catalog, CatalogError, TeaserMode, TeaserSpec};
pub use emotion::{Emotion, EmotionDistribution};
pub use exec::Execution;
pub use fusion::{fuse, recommend, FusionWeights, Modality, Recommendation};
pub use mfcc::{mfcc, FeatureVector, FrameSpec, MfccExtractor};
pub use pipeline::{Analysis, Pipeline};
