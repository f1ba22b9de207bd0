//! Shared formatting for CSV output.

/// Scientific notation with 17 significant digits, enough to round-trip any
/// `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
