//! Number formatting for human-readable reports. CSV output uses the
//! shortest round-trip representation instead.

/// Six significant digits, keeping trailing zeros: `1.25790`, `0.575000`.
/// Magnitudes outside `[1e-5, 1e6)` switch to scientific notation.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    // Let the formatter do the rounding, then read the exponent back.
    let sci = format!("{x:.5e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific notation");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..6).contains(&exponent) {
        let decimals = (5 - exponent) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{mantissa}e{exponent}")
    }
}
