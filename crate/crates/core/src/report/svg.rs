//! Shared SVG building blocks: escaping, color scales, and the hatch
//! pattern used for missing cells. Everything renders to plain attribute
//! strings so the documents stay self-contained.

/// Escapes text for use in XML content and attribute values.
pub fn escape_xml(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Color scale for heatmap cells over the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorScale {
    /// Blue-white-red, centered at 0.5; for response matrices where the
    /// poles mean disagree/agree.
    Diverging,
    /// White to dark plum, anchored at 0; for distance magnitudes.
    Sequential,
}

impl ColorScale {
    pub fn name(self) -> &'static str {
        match self {
            ColorScale::Diverging => "diverging",
            ColorScale::Sequential => "sequential",
        }
    }

    pub fn from_name(name: &str) -> Option<ColorScale> {
        match name {
            "diverging" => Some(ColorScale::Diverging),
            "sequential" => Some(ColorScale::Sequential),
            _ => None,
        }
    }

    /// Hex color for a value in [0, 1].
    pub fn color(self, value: f64) -> String {
        let v = value.clamp(0.0, 1.0);
        match self {
            ColorScale::Diverging => {
                const LOW: [f64; 3] = [0x21 as f64, 0x66 as f64, 0xAC as f64];
                const MID: [f64; 3] = [0xF7 as f64, 0xF7 as f64, 0xF7 as f64];
                const HIGH: [f64; 3] = [0xB2 as f64, 0x18 as f64, 0x2B as f64];
                if v <= 0.5 {
                    lerp_rgb(LOW, MID, v * 2.0)
                } else {
                    lerp_rgb(MID, HIGH, (v - 0.5) * 2.0)
                }
            }
            ColorScale::Sequential => {
                const LOW: [f64; 3] = [0xFF as f64, 0xF7 as f64, 0xFB as f64];
                const HIGH: [f64; 3] = [0x68 as f64, 0x10 as f64, 0x48 as f64];
                lerp_rgb(LOW, HIGH, v)
            }
        }
    }
}

fn lerp_rgb(from: [f64; 3], to: [f64; 3], t: f64) -> String {
    let mix = |a: f64, b: f64| -> u8 { (a + (b - a) * t).round() as u8 };
    format!(
        "#{:02X}{:02X}{:02X}",
        mix(from[0], to[0]),
        mix(from[1], to[1]),
        mix(from[2], to[2])
    )
}

/// Fill url for cells with no value.
pub const MISSING_FILL: &str = "url(#missing)";

/// The `<defs>` block with the hatch pattern for missing cells.
pub fn missing_pattern_defs() -> &'static str {
    concat!(
        "<defs><pattern id=\"missing\" width=\"6\" height=\"6\" ",
        "patternUnits=\"userSpaceOnUse\">",
        "<rect width=\"6\" height=\"6\" fill=\"#EFEFEF\"/>",
        "<path d=\"M0 6 L6 0\" stroke=\"#9A9A9A\" stroke-width=\"1\"/>",
        "</pattern></defs>"
    )
}

/// Opens an `<svg>` document with fixed dimensions.
pub fn open_svg(width: u32, height: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    )
}

/// A vertical legend bar of discrete color steps with min/mid/max labels.
pub fn legend(scale: ColorScale, x: u32, y: u32, height: u32) -> String {
    const STEPS: u32 = 24;
    let mut out = String::new();
    let step_height = height as f64 / STEPS as f64;
    for step in 0..STEPS {
        // top of the bar is the high end of the scale
        let value = 1.0 - (step as f64 + 0.5) / STEPS as f64;
        let top = y as f64 + step as f64 * step_height;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{top:.1}\" width=\"12\" height=\"{h:.1}\" fill=\"{fill}\"/>",
            h = step_height + 0.5,
            fill = scale.color(value)
        ));
    }
    for (value, label) in [(1.0, "1.0"), (0.5, "0.5"), (0.0, "0.0")] {
        let label_y = y as f64 + (1.0 - value) * height as f64 + 3.0;
        out.push_str(&format!(
            "<text x=\"{tx}\" y=\"{label_y:.1}\" font-family=\"sans-serif\" \
             font-size=\"9\" fill=\"#333333\">{label}</text>",
            tx = x + 16
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{x}\" y=\"{y}\" width=\"12\" height=\"{height}\" fill=\"none\" \
         stroke=\"#666666\" stroke-width=\"0.5\"/>"
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_covers_the_special_characters() {
        assert_eq!(
            escape_xml(r#"a<b>&"c'"#),
            "a&lt;b&gt;&amp;&quot;c&apos;"
        );
    }

    #[test]
    fn diverging_scale_is_white_at_the_center() {
        assert_eq!(ColorScale::Diverging.color(0.5), "#F7F7F7");
        assert_eq!(ColorScale::Diverging.color(0.0), "#2166AC");
        assert_eq!(ColorScale::Diverging.color(1.0), "#B2182B");
    }

    #[test]
    fn sequential_scale_darkens_with_value() {
        assert_eq!(ColorScale::Sequential.color(0.0), "#FFF7FB");
        assert_eq!(ColorScale::Sequential.color(1.0), "#681048");
    }

    #[test]
    fn scale_names_round_trip() {
        for scale in [ColorScale::Diverging, ColorScale::Sequential] {
            assert_eq!(ColorScale::from_name(scale.name()), Some(scale));
        }
    }
}
