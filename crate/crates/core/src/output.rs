//! Shared text formatting for CSV and table output.

/// Full-precision scientific notation (17 significant digits, `.` separator).
pub fn format_float(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}
