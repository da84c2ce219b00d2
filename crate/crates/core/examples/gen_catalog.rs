//! Regenerates `data/catalog.json`.
//!
//!     cargo run -p teaser-core --example gen_catalog > crates/core/data/catalog.json

use teaser_core::catalog::color::{brightness_variant, format_hex, paired_color, parse_hex};
use teaser_core::catalog::{
    teaser_id, to_document, Animation, BubbleTransform, ColorFill, Keyframe, Render, TeaserMode,
    TeaserSpec,
};
use teaser_core::Emotion;

struct Design {
    motion: &'static str,
    decor: &'static [&'static str],
    loop_ms: u32,
    amp: f64,
}

const fn d(motion: &'static str, decor: &'static [&'static str], loop_ms: u32, amp: f64) -> Design {
    Design {
        motion,
        decor,
        loop_ms,
        amp,
    }
}

fn designs(e: Emotion) -> [Design; 5] {
    match e {
        Emotion::Happiness => [
            d("bounce", &["confetti"], 1600, 1.0),
            d("dance", &["music_notes"], 2000, 1.0),
            d("bounce", &["sparkles"], 1400, 0.7),
            d("dance", &["hearts"], 2400, 1.4),
            d("bounce", &["balloons"], 1800, 1.3),
        ],
        Emotion::Sadness => [
            d("melt", &["drips"], 3400, 1.0),
            d("tear", &["teardrops"], 3000, 1.0),
            d("melt", &["puddle"], 3600, 1.3),
            d("tear", &["rain"], 2800, 0.8),
            d("tear", &["grey_cloud", "teardrops"], 3200, 1.2),
        ],
        Emotion::Surprise => [
            d("pop", &["exclamation"], 1200, 1.0),
            d("splash", &["splash_drops"], 1500, 1.0),
            d("pop", &["burst_lines"], 1300, 1.3),
            d("splash", &["stars"], 1700, 0.8),
            d("pop", &["exclamation", "question"], 1400, 0.8),
        ],
        Emotion::Calmness => [
            d("float", &["clouds"], 3600, 1.0),
            d("water", &["ripples"], 3200, 1.0),
            d("float", &["breeze"], 3400, 0.7),
            d("water", &["waves"], 3000, 1.3),
            d("float", &["bubbles"], 2800, 1.2),
        ],
        Emotion::Fear => [
            d("tremble", &["sweat_drops"], 1200, 1.0),
            d("fluctuate", &["shadow"], 2400, 1.0),
            d("tremble", &["shiver_lines"], 1300, 1.4),
            d("fluctuate", &["ghost_outline"], 2200, 1.3),
            d("tremble", &["dark_vignette"], 1500, 0.7),
        ],
        Emotion::Anger => [
            d("flame", &["fire", "smoke"], 1400, 1.0),
            d("clench", &["steam"], 1200, 1.0),
            d("flame", &["fire_breath"], 1800, 1.3),
            d("clench", &["vein", "shake_lines"], 1600, 1.2),
            d("flame", &["sparks", "fire"], 2000, 0.8),
        ],
    }
}

fn tf(scale: f64, offset_x: f64, offset_y: f64, rotation: f64) -> BubbleTransform {
    BubbleTransform {
        scale,
        offset_x,
        offset_y,
        rotation,
    }
}

fn round(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// (time, transform, decor opacity) templates per motion class; `a` scales
/// the motion amplitude. First and last transforms are the identity.
fn keyframes(motion: &str, a: f64) -> Vec<Keyframe> {
    let id = BubbleTransform::IDENTITY;
    let raw: Vec<(f64, BubbleTransform, f64)> = match motion {
        "bounce" => vec![
            (0.0, id, 0.0),
            (0.3, tf(1.0 + 0.05 * a, 0.0, -12.0 * a, 0.0), 1.0),
            (0.5, tf(1.0 - 0.06 * a, 0.0, 0.0, 0.0), 0.8),
            (0.75, tf(1.0 + 0.02 * a, 0.0, -5.0 * a, 0.0), 1.0),
            (1.0, id, 0.0),
        ],
        "dance" => vec![
            (0.0, id, 0.5),
            (0.25, tf(1.0, -6.0 * a, -3.0 * a, -8.0 * a), 1.0),
            (0.5, id, 0.5),
            (0.75, tf(1.0, 6.0 * a, -3.0 * a, 8.0 * a), 1.0),
            (1.0, id, 0.5),
        ],
        "flame" => vec![
            (0.0, id, 0.6),
            (0.2, tf(1.0 + 0.08 * a, 0.0, -2.0 * a, 0.0), 1.0),
            (0.45, tf(1.0 + 0.03 * a, 1.5 * a, 0.0, 2.0 * a), 0.8),
            (0.7, tf(1.0 + 0.1 * a, -1.5 * a, -2.0 * a, -2.0 * a), 1.0),
            (1.0, id, 0.6),
        ],
        "clench" => vec![
            (0.0, id, 0.0),
            (0.3, tf(1.0 - 0.1 * a, 0.0, 0.0, 0.0), 0.7),
            (0.4, tf(1.0 - 0.1 * a, 2.0 * a, 0.0, 0.0), 1.0),
            (0.5, tf(1.0 - 0.1 * a, -2.0 * a, 0.0, 0.0), 1.0),
            (0.6, tf(1.0 - 0.1 * a, 2.0 * a, 0.0, 0.0), 1.0),
            (0.85, tf(1.0 + 0.04 * a, 0.0, 0.0, 0.0), 0.3),
            (1.0, id, 0.0),
        ],
        "float" => vec![
            (0.0, id, 0.4),
            (0.25, tf(1.0, 2.0 * a, -4.0 * a, 1.0 * a), 0.7),
            (0.5, tf(1.0, 0.0, -8.0 * a, 0.0), 1.0),
            (0.75, tf(1.0, -2.0 * a, -4.0 * a, -a), 0.7),
            (1.0, id, 0.4),
        ],
        "water" => vec![
            (0.0, id, 0.3),
            (0.25, tf(1.0 + 0.02 * a, 4.0 * a, 0.0, 3.0 * a), 0.8),
            (0.5, tf(1.0, 0.0, 2.0 * a, 0.0), 1.0),
            (0.75, tf(1.0 + 0.02 * a, -4.0 * a, 0.0, -3.0 * a), 0.8),
            (1.0, id, 0.3),
        ],
        "tremble" => {
            let mut v = vec![(0.0, id, 0.5)];
            for i in 1..10 {
                let side = if i % 2 == 1 { 1.0 } else { -1.0 };
                v.push((
                    i as f64 / 10.0,
                    tf(1.0 - 0.02 * a, 3.0 * a * side, 0.0, side * a),
                    0.5 + 0.05 * i as f64,
                ));
            }
            v.push((1.0, id, 0.5));
            v
        }
        "fluctuate" => vec![
            (0.0, id, 0.2),
            (0.2, tf(1.0 + 0.06 * a, 0.0, 0.0, 0.0), 0.9),
            (0.45, tf(1.0 - 0.06 * a, 1.0 * a, 0.0, 0.0), 0.4),
            (0.7, tf(1.0 + 0.04 * a, -a, 0.0, 0.0), 1.0),
            (1.0, id, 0.2),
        ],
        "tear" => vec![
            (0.0, id, 0.0),
            (0.3, tf(1.0, 0.0, 2.0 * a, -2.0 * a), 0.6),
            (0.6, tf(1.0 - 0.03 * a, 0.0, 4.0 * a, -3.0 * a), 1.0),
            (0.85, tf(1.0, 0.0, 2.0 * a, -a), 0.4),
            (1.0, id, 0.0),
        ],
        "melt" => vec![
            (0.0, id, 0.0),
            (0.4, tf(1.0 - 0.05 * a, 0.0, 5.0 * a, 0.0), 0.5),
            (0.7, tf(1.0 - 0.08 * a, 0.0, 8.0 * a, 0.0), 1.0),
            (1.0, id, 0.0),
        ],
        "pop" => vec![
            (0.0, id, 0.0),
            (0.12, tf(1.0 + 0.25 * a, 0.0, -4.0 * a, 0.0), 1.0),
            (0.3, tf(1.0 - 0.05 * a, 0.0, 0.0, 0.0), 1.0),
            (0.45, tf(1.0 + 0.05 * a, 0.0, 0.0, 0.0), 0.6),
            (1.0, id, 0.0),
        ],
        "splash" => vec![
            (0.0, id, 0.0),
            (0.15, tf(1.0 + 0.15 * a, 0.0, 0.0, 0.0), 1.0),
            (0.35, tf(1.0 - 0.04 * a, 0.0, 2.0 * a, 0.0), 0.7),
            (0.6, tf(1.0 + 0.02 * a, 0.0, 0.0, 0.0), 0.2),
            (1.0, id, 0.0),
        ],
        other => panic!("no template for {other}"),
    };
    raw.into_iter()
        .map(|(t, tr, o)| Keyframe {
            time_fraction: t,
            transform: tf(
                round(tr.scale),
                round(tr.offset_x),
                round(tr.offset_y),
                round(tr.rotation),
            ),
            decor_opacity: round(o),
        })
        .collect()
}

fn main() {
    let mut specs = Vec::new();
    for e in Emotion::ALL {
        for (i, design) in designs(e).into_iter().enumerate() {
            let variant = i as u8 + 1;
            specs.push(TeaserSpec {
                id: teaser_id(TeaserMode::Animated, e, variant),
                emotion: e,
                variant,
                render: Render::Animated(Animation {
                    loop_ms: design.loop_ms,
                    motion_class: design.motion.to_string(),
                    decor_effects: design.decor.iter().map(|s| s.to_string()).collect(),
                    keyframes: keyframes(design.motion, design.amp),
                }),
            });
        }
    }
    for e in Emotion::ALL {
        let base = paired_color(e);
        for level in 1..=5u8 {
            let fill = brightness_variant(parse_hex(base).unwrap(), level).unwrap();
            specs.push(TeaserSpec {
                id: teaser_id(TeaserMode::Color, e, level),
                emotion: e,
                variant: level,
                render: Render::Color(ColorFill {
                    base_color: base.to_string(),
                    brightness_level: level,
                    fill_color: format_hex(fill),
                }),
            });
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&to_document(&specs)).unwrap()
    );
}
