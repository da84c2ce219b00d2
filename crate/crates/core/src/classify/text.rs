//! Lexicon-based text emotion classifier and the fine-grained label taxonomy
//! it is built from.
//!
//! A lexicon document carries a `source_taxonomy` (each of the 28
//! fine-grained labels mapped to a canonical emotion index or `"excluded"`),
//! explicit `entries` (`token -> [emotion index, weight]`), and optionally
//! `labeled_words` (`fine label -> [tokens]`), which are routed through the
//! taxonomy with weight 1.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::emotion::{Emotion, EmotionDistribution, NUM_EMOTIONS};

/// The fine-grained source labels (27 emotions plus neutral).
pub const FINE_LABELS: [&str; 28] = [
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
    "neutral",
];

const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("lexicon document is not valid: {0}")]
    Schema(String),
    #[error("taxonomy label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("taxonomy label {0:?} is not a known fine-grained label")]
    UnknownLabel(String),
    #[error("taxonomy is missing label {0:?}")]
    MissingLabel(String),
    #[error("entry {token:?}: emotion index {index} out of range")]
    BadEmotionIndex { token: String, index: usize },
    #[error("entry {token:?}: weight must be positive and finite")]
    BadWeight { token: String },
    #[error("labeled words reference unknown label {0:?}")]
    UnlabeledWords(String),
}

/// Where a fine-grained label lands among the canonical emotions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum TaxonomyTarget {
    Emotion(usize),
    #[serde(serialize_with = "excluded")]
    Excluded,
}

fn excluded<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("excluded")
}

impl<'de> Deserialize<'de> for TaxonomyTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(TaxonomyTarget::Emotion(i)),
            Raw::Word(w) if w == "excluded" => Ok(TaxonomyTarget::Excluded),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected an emotion index or \"excluded\", got {w:?}"
            ))),
        }
    }
}

/// Label/target pairs in document order, keeping duplicates so validation
/// can reject them.
#[derive(Debug, Clone, Default)]
struct PairList(Vec<(String, TaxonomyTarget)>);

impl<'de> Deserialize<'de> for PairList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = PairList;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from label to emotion index or \"excluded\"")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<PairList, A::Error> {
                let mut pairs = Vec::new();
                while let Some(entry) = map.next_entry::<String, TaxonomyTarget>()? {
                    pairs.push(entry);
                }
                Ok(PairList(pairs))
            }
        }
        d.deserialize_map(PairVisitor)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconDocument {
    source_taxonomy: PairList,
    #[serde(default)]
    entries: BTreeMap<String, (usize, f64)>,
    #[serde(default)]
    labeled_words: BTreeMap<String, Vec<String>>,
}

/// Validated fine-label mapping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Taxonomy {
    map: BTreeMap<String, TaxonomyTarget>,
}

impl Taxonomy {
    fn from_pairs(pairs: Vec<(String, TaxonomyTarget)>) -> Result<Self, LexiconError> {
        let mut map = BTreeMap::new();
        for (label, target) in pairs {
            if !FINE_LABELS.contains(&label.as_str()) {
                return Err(LexiconError::UnknownLabel(label));
            }
            if let TaxonomyTarget::Emotion(index) = target {
                if index >= NUM_EMOTIONS {
                    return Err(LexiconError::BadEmotionIndex {
                        token: label,
                        index,
                    });
                }
            }
            if map.insert(label.clone(), target).is_some() {
                return Err(LexiconError::DuplicateLabel(label));
            }
        }
        if let Some(missing) = FINE_LABELS.iter().find(|l| !map.contains_key(**l)) {
            return Err(LexiconError::MissingLabel(missing.to_string()));
        }
        Ok(Self { map })
    }

    pub fn target(&self, label: &str) -> Option<TaxonomyTarget> {
        self.map.get(label).copied()
    }

    /// Fine labels routed to `emotion`, alphabetically.
    pub fn labels_for(&self, emotion: Emotion) -> Vec<&str> {
        self.map
            .iter()
            .filter(|(_, t)| **t == TaxonomyTarget::Emotion(emotion.index()))
            .map(|(l, _)| l.as_str())
            .collect()
    }
}

/// Token weights per canonical emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionLexicon {
    entries: HashMap<String, (Emotion, f64)>,
    taxonomy: Taxonomy,
}

impl EmotionLexicon {
    pub fn from_json(document: &str) -> Result<Self, LexiconError> {
        let doc: LexiconDocument =
            serde_json::from_str(document).map_err(|e| LexiconError::Schema(e.to_string()))?;
        let taxonomy = Taxonomy::from_pairs(doc.source_taxonomy.0)?;

        let mut entries = HashMap::new();
        for (label, words) in doc.labeled_words {
            match taxonomy.target(&label) {
                None => return Err(LexiconError::UnlabeledWords(label)),
                Some(TaxonomyTarget::Excluded) => {}
                Some(TaxonomyTarget::Emotion(i)) => {
                    for w in words {
                        entries.insert(normalize_token(&w), (Emotion::ALL[i], 1.0));
                    }
                }
            }
        }
        // explicit entries take precedence over labeled words
        for (token, (index, weight)) in doc.entries {
            let emotion =
                Emotion::from_index(index).ok_or_else(|| LexiconError::BadEmotionIndex {
                    token: token.clone(),
                    index,
                })?;
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(LexiconError::BadWeight { token });
            }
            entries.insert(normalize_token(&token), (emotion, weight));
        }
        Ok(Self { entries, taxonomy })
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn bundled_document() -> &'static str {
        BUNDLED_LEXICON
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn lookup(&self, token: &str) -> Option<(Emotion, f64)> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn normalize_token(token: &str) -> String {
    token
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Lowercased, punctuation-free whitespace tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Text-based distribution: per-emotion lexicon weight sums with add-one
/// smoothing, or uniform when nothing matches.
pub fn classify_text(transcript: &str, lexicon: &EmotionLexicon) -> EmotionDistribution {
    let mut weights = [0.0; NUM_EMOTIONS];
    for token in tokenize(transcript) {
        if let Some((emotion, w)) = lexicon.lookup(&token) {
            weights[emotion.index()] += w;
        }
    }
    if weights.iter().sum::<f64>() == 0.0 {
        return EmotionDistribution::uniform();
    }
    EmotionDistribution::from_weights(weights.map(|w| w + 1.0)).expect("positive weights")
}
