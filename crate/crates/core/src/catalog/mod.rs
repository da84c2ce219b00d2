//! Teaser catalog: 30 animated bubble designs and 30 color-baseline variants,
//! six emotions by five variants each, addressed by `"<mode>/<emotion>/<n>"`.
//!
//! The JSON document is kept verbatim so the server can hand the exact bytes
//! it validated to clients.

pub mod color;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::emotion::{Emotion, NUM_EMOTIONS};

/// Animated loops must be strictly shorter than this.
pub const MAX_LOOP_MS: u32 = 4000;

pub const VARIANTS_PER_EMOTION: u8 = 5;

const BUNDLED_CATALOG: &str = include_str!("../../data/catalog.json");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invariant violation{}: {reason}", id.as_ref().map(|i| format!(" in {i}")).unwrap_or_default())]
    InvariantViolation { id: Option<String>, reason: String },
    #[error("unknown teaser {0:?}")]
    UnknownTeaser(String),
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::SchemaViolation(_) => "SchemaViolation",
            CatalogError::InvariantViolation { .. } => "InvariantViolation",
            CatalogError::UnknownTeaser(_) => "UnknownTeaser",
        }
    }
}

fn violation(id: &str, reason: impl Into<String>) -> CatalogError {
    CatalogError::InvariantViolation {
        id: Some(id.to_string()),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeaserMode {
    Animated,
    Color,
}

impl TeaserMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TeaserMode::Animated => "animated",
            TeaserMode::Color => "color",
        }
    }
}

impl fmt::Display for TeaserMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleTransform {
    pub scale: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    /// Degrees, clockwise.
    pub rotation: f64,
}

impl BubbleTransform {
    pub const IDENTITY: BubbleTransform = BubbleTransform {
        scale: 1.0,
        offset_x: 0.0,
        offset_y: 0.0,
        rotation: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub time_fraction: f64,
    pub transform: BubbleTransform,
    pub decor_opacity: f64,
}

/// Render parameters of an animated teaser.
#[derive(Debug, Clone, PartialEq)]
pub struct Animation {
    pub loop_ms: u32,
    pub motion_class: String,
    pub decor_effects: Vec<String>,
    pub keyframes: Vec<Keyframe>,
}

/// Render parameters of a color-baseline teaser.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorFill {
    pub base_color: String,
    pub brightness_level: u8,
    /// Bubble color at this brightness level.
    pub fill_color: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Render {
    Animated(Animation),
    Color(ColorFill),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeaserSpec {
    pub id: String,
    pub emotion: Emotion,
    pub variant: u8,
    pub render: Render,
}

impl TeaserSpec {
    pub fn mode(&self) -> TeaserMode {
        match self.render {
            Render::Animated(_) => TeaserMode::Animated,
            Render::Color(_) => TeaserMode::Color,
        }
    }

    pub fn animation(&self) -> Option<&Animation> {
        match &self.render {
            Render::Animated(a) => Some(a),
            Render::Color(_) => None,
        }
    }

    pub fn color(&self) -> Option<&ColorFill> {
        match &self.render {
            Render::Color(c) => Some(c),
            Render::Animated(_) => None,
        }
    }
}

pub fn teaser_id(mode: TeaserMode, emotion: Emotion, variant: u8) -> String {
    format!("{mode}/{emotion}/{variant}")
}

/// Motion classes allowed for each emotion's animated variants.
pub fn motion_family(emotion: Emotion) -> &'static [&'static str] {
    match emotion {
        Emotion::Anger => &["flame", "clench"],
        Emotion::Calmness => &["float", "water"],
        Emotion::Fear => &["tremble", "fluctuate"],
        Emotion::Happiness => &["bounce", "dance"],
        Emotion::Sadness => &["tear", "melt"],
        Emotion::Surprise => &["pop", "splash"],
    }
}

/// Wire shape of one entry; mode-specific fields are optional here and
/// enforced during validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeaserRecord {
    pub id: String,
    pub mode: TeaserMode,
    pub emotion: Emotion,
    pub variant: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_ms: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decor_effects: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyframes: Option<Vec<Keyframe>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brightness_level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_color: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDocument {
    pub animated: Vec<TeaserRecord>,
    pub color: Vec<TeaserRecord>,
}

impl From<&TeaserSpec> for TeaserRecord {
    fn from(spec: &TeaserSpec) -> Self {
        let mut rec = TeaserRecord {
            id: spec.id.clone(),
            mode: spec.mode(),
            emotion: spec.emotion,
            variant: spec.variant,
            loop_ms: None,
            motion_class: None,
            decor_effects: None,
            keyframes: None,
            base_color: None,
            brightness_level: None,
            fill_color: None,
        };
        match &spec.render {
            Render::Animated(a) => {
                rec.loop_ms = Some(a.loop_ms);
                rec.motion_class = Some(a.motion_class.clone());
                rec.decor_effects = Some(a.decor_effects.clone());
                rec.keyframes = Some(a.keyframes.clone());
            }
            Render::Color(c) => {
                rec.base_color = Some(c.base_color.clone());
                rec.brightness_level = Some(c.brightness_level);
                rec.fill_color = Some(c.fill_color.clone());
            }
        }
        rec
    }
}

fn require<T>(field: Option<T>, id: &str, name: &str) -> Result<T, CatalogError> {
    field.ok_or_else(|| CatalogError::SchemaViolation(format!("{id}: missing field `{name}`")))
}

fn reject_extra(present: bool, id: &str, name: &str, mode: TeaserMode) -> Result<(), CatalogError> {
    if present {
        return Err(CatalogError::SchemaViolation(format!(
            "{id}: field `{name}` is not allowed on {mode} entries"
        )));
    }
    Ok(())
}

fn validate_animation(id: &str, emotion: Emotion, anim: &Animation) -> Result<(), CatalogError> {
    if anim.loop_ms == 0 || anim.loop_ms >= MAX_LOOP_MS {
        return Err(violation(
            id,
            format!("loop_ms {} must lie in 1..{MAX_LOOP_MS}", anim.loop_ms),
        ));
    }
    if !motion_family(emotion).contains(&anim.motion_class.as_str()) {
        return Err(violation(
            id,
            format!(
                "motion class {:?} is outside the {emotion} family {:?}",
                anim.motion_class,
                motion_family(emotion)
            ),
        ));
    }
    let frames = &anim.keyframes;
    if frames.len() < 2 {
        return Err(violation(id, "an animation needs at least two keyframes"));
    }
    for k in frames {
        let t = &k.transform;
        let finite = [
            k.time_fraction,
            k.decor_opacity,
            t.scale,
            t.offset_x,
            t.offset_y,
            t.rotation,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || !(0.0..=1.0).contains(&k.time_fraction) {
            return Err(violation(
                id,
                "keyframe values must be finite with time in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&k.decor_opacity) || t.scale <= 0.0 {
            return Err(violation(
                id,
                "decor opacity must lie in [0, 1] and scale be positive",
            ));
        }
    }
    if frames[0].time_fraction != 0.0 || frames[frames.len() - 1].time_fraction != 1.0 {
        return Err(violation(id, "keyframes must start at 0 and end at 1"));
    }
    if frames
        .windows(2)
        .any(|w| w[1].time_fraction <= w[0].time_fraction)
    {
        return Err(violation(id, "keyframe times must strictly increase"));
    }
    if frames[0].transform != frames[frames.len() - 1].transform {
        return Err(violation(
            id,
            "first and last transforms differ, loop is not seamless",
        ));
    }
    Ok(())
}

fn validate_color(
    id: &str,
    emotion: Emotion,
    variant: u8,
    fill: &ColorFill,
) -> Result<(), CatalogError> {
    let expected = color::paired_color(emotion);
    if !fill.base_color.eq_ignore_ascii_case(expected) {
        return Err(violation(
            id,
            format!("{emotion} pairs with {expected}, not {}", fill.base_color),
        ));
    }
    if fill.brightness_level != variant {
        return Err(violation(
            id,
            "brightness_level must equal the variant number",
        ));
    }
    let base = color::parse_hex(expected).expect("static pairing");
    let derived = color::brightness_variant(base, fill.brightness_level)
        .ok_or_else(|| violation(id, "brightness_level must lie in 1..5"))?;
    let given = color::parse_hex(&fill.fill_color).ok_or_else(|| {
        violation(
            id,
            format!("fill_color {:?} is not #RRGGBB", fill.fill_color),
        )
    })?;
    if given != derived {
        return Err(violation(
            id,
            format!(
                "fill_color {} does not match brightness level {} of {expected} ({})",
                fill.fill_color,
                fill.brightness_level,
                color::format_hex(derived)
            ),
        ));
    }
    Ok(())
}

impl TryFrom<TeaserRecord> for TeaserSpec {
    type Error = CatalogError;

    fn try_from(rec: TeaserRecord) -> Result<Self, CatalogError> {
        let id = rec.id;
        if !(1..=VARIANTS_PER_EMOTION).contains(&rec.variant) {
            return Err(violation(
                &id,
                format!("variant {} outside 1..5", rec.variant),
            ));
        }
        let expected_id = teaser_id(rec.mode, rec.emotion, rec.variant);
        if id != expected_id {
            return Err(violation(&id, format!("id must be {expected_id:?}")));
        }
        let render = match rec.mode {
            TeaserMode::Animated => {
                for (present, name) in [
                    (rec.base_color.is_some(), "base_color"),
                    (rec.brightness_level.is_some(), "brightness_level"),
                    (rec.fill_color.is_some(), "fill_color"),
                ] {
                    reject_extra(present, &id, name, rec.mode)?;
                }
                let anim = Animation {
                    loop_ms: require(rec.loop_ms, &id, "loop_ms")?,
                    motion_class: require(rec.motion_class, &id, "motion_class")?,
                    decor_effects: require(rec.decor_effects, &id, "decor_effects")?,
                    keyframes: require(rec.keyframes, &id, "keyframes")?,
                };
                validate_animation(&id, rec.emotion, &anim)?;
                Render::Animated(anim)
            }
            TeaserMode::Color => {
                for (present, name) in [
                    (rec.loop_ms.is_some(), "loop_ms"),
                    (rec.motion_class.is_some(), "motion_class"),
                    (rec.decor_effects.is_some(), "decor_effects"),
                    (rec.keyframes.is_some(), "keyframes"),
                ] {
                    reject_extra(present, &id, name, rec.mode)?;
                }
                let base_color = require(rec.base_color, &id, "base_color")?;
                let brightness_level = require(rec.brightness_level, &id, "brightness_level")?;
                let fill_color = match rec.fill_color {
                    Some(c) => c,
                    None => color::parse_hex(&base_color)
                        .and_then(|b| color::brightness_variant(b, brightness_level))
                        .map(color::format_hex)
                        .unwrap_or_default(),
                };
                let fill = ColorFill {
                    base_color,
                    brightness_level,
                    fill_color,
                };
                validate_color(&id, rec.emotion, rec.variant, &fill)?;
                Render::Color(fill)
            }
        };
        Ok(TeaserSpec {
            id,
            emotion: rec.emotion,
            variant: rec.variant,
            render,
        })
    }
}

/// Validated, immutable catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: BTreeMap<String, TeaserSpec>,
    document: String,
    version: String,
}

impl Catalog {
    /// Parses and validates a catalog document.
    pub fn load(document: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDocument = serde_json::from_str(document)
            .map_err(|e| CatalogError::SchemaViolation(e.to_string()))?;

        let mut entries = BTreeMap::new();
        for (mode, records) in [
            (TeaserMode::Animated, doc.animated),
            (TeaserMode::Color, doc.color),
        ] {
            let expected = NUM_EMOTIONS * VARIANTS_PER_EMOTION as usize;
            if records.len() != expected {
                return Err(CatalogError::InvariantViolation {
                    id: None,
                    reason: format!(
                        "{mode} section has {} entries, expected {expected}",
                        records.len()
                    ),
                });
            }
            for rec in records {
                if rec.mode != mode {
                    return Err(violation(
                        &rec.id,
                        format!("listed under {mode} but has mode {}", rec.mode),
                    ));
                }
                let spec = TeaserSpec::try_from(rec)?;
                let id = spec.id.clone();
                if entries.insert(id.clone(), spec).is_some() {
                    return Err(violation(&id, "duplicate id"));
                }
            }
            // 30 entries, unique ids of the form mode/emotion/1..5: every
            // (emotion, variant) slot is filled exactly once
        }

        let digest = hex::encode(Sha256::digest(document.as_bytes()));
        Ok(Self {
            entries,
            document: document.to_string(),
            version: format!("sha256:{}", &digest[..16]),
        })
    }

    /// The catalog shipped with the crate.
    pub fn bundled() -> Self {
        Self::load(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    pub fn bundled_document() -> &'static str {
        BUNDLED_CATALOG
    }

    /// The document exactly as loaded.
    pub fn document(&self) -> &str {
        &self.document
    }

    /// Content-derived version string.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TeaserSpec> {
        self.entries.values()
    }

    pub fn resolve(&self, id: &str) -> Result<&TeaserSpec, CatalogError> {
        self.entries
            .get(id)
            .ok_or_else(|| CatalogError::UnknownTeaser(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// The five variants of one emotion in one mode, in variant order.
    pub fn list_by_emotion(&self, emotion: Emotion, mode: TeaserMode) -> Vec<&TeaserSpec> {
        (1..=VARIANTS_PER_EMOTION)
            .filter_map(|v| self.entries.get(&teaser_id(mode, emotion, v)))
            .collect()
    }

    pub fn count(&self, mode: TeaserMode) -> usize {
        self.entries.values().filter(|s| s.mode() == mode).count()
    }
}

/// Serializes specs into the catalog document shape.
pub fn to_document(specs: &[TeaserSpec]) -> CatalogDocument {
    let (animated, color): (Vec<_>, Vec<_>) = specs
        .iter()
        .map(TeaserRecord::from)
        .partition(|r| r.mode == TeaserMode::Animated);
    CatalogDocument { animated, color }
}
