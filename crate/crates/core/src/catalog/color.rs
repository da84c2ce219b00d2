//! sRGB hex colors and brightness steps in the OKLab perceptual space.

use crate::emotion::Emotion;

/// Fixed emotion/color pairing of the color baseline.
pub fn paired_color(emotion: Emotion) -> &'static str {
    match emotion {
        Emotion::Anger => "#D32F2F",     // red
        Emotion::Happiness => "#F9D342", // yellow
        Emotion::Fear => "#7B1FA2",      // purple
        Emotion::Surprise => "#00838F",  // dark cyan
        Emotion::Sadness => "#1A3E8C",   // dark blue
        Emotion::Calmness => "#9FD4F5",  // light blue
    }
}

/// Fraction of the way towards black (below 3) or white (above 3) for each
/// brightness level; level 3 is the paired color itself.
const LEVEL_MIX: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oklab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Oklab {
    /// Hue angle in degrees.
    pub fn hue_deg(&self) -> f64 {
        self.b.atan2(self.a).to_degrees()
    }

    pub fn chroma(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

pub fn parse_hex(hex: &str) -> Option<[u8; 3]> {
    let digits = hex.strip_prefix('#')?;
    if digits.len() != 6 || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(&digits[i..i + 2], 16).ok();
    Some([byte(0)?, byte(2)?, byte(4)?])
}

pub fn format_hex(rgb: [u8; 3]) -> String {
    format!("#{:02X}{:02X}{:02X}", rgb[0], rgb[1], rgb[2])
}

fn to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn to_gamma(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_oklab(rgb: [u8; 3]) -> Oklab {
    let [r, g, b] = rgb.map(|c| to_linear(c as f64 / 255.0));
    let l = 0.412_221_470_8 * r + 0.536_332_536_3 * g + 0.051_445_992_9 * b;
    let m = 0.211_903_498_2 * r + 0.680_699_545_1 * g + 0.107_396_956_6 * b;
    let s = 0.088_302_461_9 * r + 0.281_718_837_6 * g + 0.629_978_700_5 * b;
    let (l, m, s) = (l.cbrt(), m.cbrt(), s.cbrt());
    Oklab {
        l: 0.210_454_255_3 * l + 0.793_617_785_0 * m - 0.004_072_046_8 * s,
        a: 1.977_998_495_1 * l - 2.428_592_205_0 * m + 0.450_593_709_9 * s,
        b: 0.025_904_037_1 * l + 0.782_771_766_2 * m - 0.808_675_766_0 * s,
    }
}

pub fn oklab_to_srgb(lab: Oklab) -> [u8; 3] {
    let l = lab.l + 0.396_337_777_4 * lab.a + 0.215_803_757_3 * lab.b;
    let m = lab.l - 0.105_561_345_8 * lab.a - 0.063_854_172_8 * lab.b;
    let s = lab.l - 0.089_484_177_5 * lab.a - 1.291_485_548_0 * lab.b;
    let (l, m, s) = (l.powi(3), m.powi(3), s.powi(3));
    let r = 4.076_741_662_1 * l - 3.307_711_591_3 * m + 0.230_969_929_2 * s;
    let g = -1.268_438_004_6 * l + 2.609_757_401_1 * m - 0.341_319_396_5 * s;
    let b = -0.004_196_086_3 * l - 0.703_418_614_7 * m + 1.707_614_701_0 * s;
    [r, g, b].map(|c| (to_gamma(c.clamp(0.0, 1.0)) * 255.0).round() as u8)
}

/// Color for `level` (1 darkest .. 5 lightest) derived from `base`.
///
/// Darker levels scale all OKLab components towards black; lighter levels
/// interpolate towards white. Both keep the OKLab hue angle.
pub fn brightness_variant(base: [u8; 3], level: u8) -> Option<[u8; 3]> {
    let mix = *LEVEL_MIX.get(usize::from(level).checked_sub(1)?)?;
    let lab = srgb_to_oklab(base);
    let out = if mix < 0.0 {
        let k = 1.0 + mix;
        Oklab {
            l: lab.l * k,
            a: lab.a * k,
            b: lab.b * k,
        }
    } else {
        Oklab {
            l: lab.l + (1.0 - lab.l) * mix,
            a: lab.a * (1.0 - mix),
            b: lab.b * (1.0 - mix),
        }
    };
    Some(oklab_to_srgb(out))
}
