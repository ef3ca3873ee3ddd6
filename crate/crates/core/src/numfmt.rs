//! Number formatting shared by every CSV writer.

/// Formats `x` rounded to `digits` significant digits, without trailing zeros.
pub fn significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("scientific formatting round-trips");
    rounded.to_string()
}

/// The CSV convention: six significant digits.
pub fn sig6(x: f64) -> String {
    significant(x, 6)
}
