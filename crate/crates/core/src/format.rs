//! Deterministic text rendering of floating-point results.

/// Rounds to 10 significant digits and prints the shortest decimal that
/// reads back as the rounded value. Non-finite values print as `NaN`,
/// `inf` or `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("scientific form parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    let plain = format!("{rounded}");
    let sci = format!("{rounded:e}");
    if plain.len() <= sci.len() + 4 {
        plain
    } else {
        sci
    }
}
